//! Summary statistics of a dependency network.
//!
//! Only nodes with at least one link enter. Path lengths are taken on the
//! largest connected component.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::DependencyNetwork;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    /// Nodes with at least one link.
    pub n: usize,
    pub edges: usize,
    pub avg_degree: f64,
    /// Mean local clustering coefficient (nodes of degree one count as zero).
    pub avg_clustering: f64,
    /// Global ratio of closed to connected triples.
    pub transitivity: f64,
    pub avg_path_length: f64,
    pub giant_size: usize,
    pub density: f64,
    pub avg_strength: f64,
    /// Mean geometric-mean weighted clustering, weights scaled by the largest weight.
    pub weighted_clustering: f64,
    /// Mean shortest-path length on the giant component with edge length `1 / w`.
    pub weighted_path_length: f64,
    pub empty: bool,
}

pub fn network_stats(net: &DependencyNetwork) -> NetworkStats {
    let nb = net.neighbours();
    let active: Vec<usize> = (0..net.n_nodes()).filter(|&i| !nb[i].is_empty()).collect();
    let n = active.len();
    if n == 0 {
        return NetworkStats {
            empty: true,
            ..NetworkStats::default()
        };
    }
    let edges: usize = active.iter().map(|&i| nb[i].len()).sum::<usize>() / 2;
    let w = &net.weights;
    let wmax = net.edges().iter().map(|e| e.2).fold(0.0, f64::max);

    let (mut c_sum, mut cw_sum, mut closed, mut triples) = (0.0, 0.0, 0usize, 0usize);
    for &i in &active {
        let k = nb[i].len();
        if k < 2 {
            continue;
        }
        let (mut t, mut tw) = (0usize, 0.0);
        for (a, &j) in nb[i].iter().enumerate() {
            for &h in &nb[i][a + 1..] {
                if w[[j, h]] > 0.0 {
                    t += 1;
                    tw += (w[[i, j]] * w[[j, h]] * w[[h, i]] / wmax.powi(3)).cbrt();
                }
            }
        }
        let pairs = k * (k - 1) / 2;
        c_sum += t as f64 / pairs as f64;
        cw_sum += tw / pairs as f64;
        closed += t;
        triples += pairs;
    }

    let giant = giant_component(&nb, &active);
    let (hops, dist) = path_lengths(net, &nb, &giant);

    NetworkStats {
        n,
        edges,
        avg_degree: 2.0 * edges as f64 / n as f64,
        avg_clustering: c_sum / n as f64,
        transitivity: if triples == 0 {
            0.0
        } else {
            closed as f64 / triples as f64
        },
        avg_path_length: hops,
        giant_size: giant.len(),
        density: if n < 2 {
            0.0
        } else {
            2.0 * edges as f64 / (n * (n - 1)) as f64
        },
        avg_strength: active.iter().map(|&i| net.strength(i)).sum::<f64>() / n as f64,
        weighted_clustering: cw_sum / n as f64,
        weighted_path_length: dist,
        empty: false,
    }
}

/// Largest component; ties go to the one holding the smallest node index.
fn giant_component(nb: &[Vec<usize>], active: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; nb.len()];
    let mut best: Vec<usize> = Vec::new();
    for &s in active {
        if seen[s] {
            continue;
        }
        let mut comp = vec![s];
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &nb[u] {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    q.push_back(v);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort_unstable();
    best
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Mean hop count and mean `1 / w` distance over ordered pairs of the component.
fn path_lengths(net: &DependencyNetwork, nb: &[Vec<usize>], comp: &[usize]) -> (f64, f64) {
    let m = comp.len();
    if m < 2 {
        return (0.0, 0.0);
    }
    let (mut hop_sum, mut dist_sum) = (0usize, 0.0);
    for &s in comp {
        let mut hops = vec![usize::MAX; nb.len()];
        hops[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &v in &nb[u] {
                if hops[v] == usize::MAX {
                    hops[v] = hops[u] + 1;
                    q.push_back(v);
                }
            }
        }
        hop_sum += comp.iter().map(|&t| hops[t]).sum::<usize>();

        let mut dist = vec![f64::INFINITY; nb.len()];
        dist[s] = 0.0;
        let mut heap = BinaryHeap::from([Item(0.0, s)]);
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &v in &nb[u] {
                let nd = d + 1.0 / net.weights[[u, v]];
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Item(nd, v));
                }
            }
        }
        dist_sum += comp.iter().map(|&t| dist[t]).sum::<f64>();
    }
    let pairs = (m * (m - 1)) as f64;
    (hop_sum as f64 / pairs, dist_sum / pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::testutil::graph;

    #[test]
    fn complete_graph() {
        let edges: Vec<(usize, usize)> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        let s = network_stats(&graph(5, &edges));
        assert_eq!((s.n, s.edges), (5, 10));
        assert_eq!(s.avg_degree, 4.0);
        assert_eq!(s.avg_clustering, 1.0);
        assert_eq!(s.transitivity, 1.0);
        assert_eq!(s.avg_path_length, 1.0);
        assert_eq!(s.density, 1.0);
        assert_eq!(s.weighted_path_length, 1.0);
        assert!((s.weighted_clustering - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_graph() {
        let s = network_stats(&graph(4, &[(0, 1), (1, 2), (2, 3)]));
        assert_eq!(s.avg_clustering, 0.0);
        assert_eq!(s.avg_path_length, 10.0 / 6.0);
        assert_eq!(s.density, 0.5);
    }

    #[test]
    fn two_triangles() {
        let s = network_stats(&graph(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]));
        assert_eq!(s.giant_size, 3);
        assert_eq!(s.avg_path_length, 1.0);
        assert_eq!(s.density, 0.4);
        assert_eq!(s.avg_clustering, 1.0);
    }

    #[test]
    fn isolated_nodes_are_ignored() {
        let s = network_stats(&graph(10, &[(0, 1), (1, 2), (2, 3)]));
        assert_eq!(s.n, 4);
        assert_eq!(s.density, 0.5);
        assert!(s.avg_degree <= (s.n - 1) as f64);
    }

    #[test]
    fn empty_flag() {
        let s = network_stats(&graph(3, &[]));
        assert!(s.empty);
        assert_eq!(s.n, 0);
        assert_eq!(s.density, 0.0);
    }

    #[test]
    fn weighted_path_prefers_strong_detour() {
        let mut net = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        net.weights[[0, 2]] = 0.1;
        net.weights[[2, 0]] = 0.1;
        let s = network_stats(&net);
        // d(0,2) = 2 via node 1 instead of 10 directly.
        assert!((s.weighted_path_length - (1.0 + 1.0 + 2.0) / 3.0).abs() < 1e-12);
        assert_eq!(s.avg_path_length, 1.0);
    }
}
