//! Weighted dependency networks built from p-value matrices.
//!
//! A pair is linked when its p-value is below `gamma` and its slope is
//! positive; the weight `(gamma - p) / gamma` lies in `(0, 1]`.

mod aggregate;
mod counts;
mod export;
mod metrics;
mod partition;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairwise::{Level, Node, PValueMatrix};

pub use aggregate::{aggregate_groups, country_pair_medians, CountryMedians};
pub use counts::{significant_link_counts, LinkCounts};
pub use export::{export_network, read_edge_csv, ExportFormat};
pub use metrics::{network_stats, NetworkStats};
pub use partition::{assortativity, hypothesis_partition, modularity, CustomPartition, Hypothesis, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdjacencyOptions {
    pub gamma: f64,
    /// Keep significant negative-slope pairs as links of the same weight.
    pub keep_negative: bool,
}

impl Default for AdjacencyOptions {
    fn default() -> Self {
        AdjacencyOptions {
            gamma: 0.1,
            keep_negative: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyNetwork {
    pub nodes: Vec<Node>,
    /// Symmetric, zero diagonal, entries in `[0, 1]`.
    pub weights: Array2<f64>,
    pub gamma: f64,
    pub level: Level,
}

impl DependencyNetwork {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// `(i, j, w)` with `i < j` and `w > 0`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_nodes();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = self.weights[[i, j]];
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    pub fn n_edges(&self) -> usize {
        self.edges().len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.weights.row(i).iter().filter(|&&w| w > 0.0).count()
    }

    pub fn strength(&self, i: usize) -> f64 {
        self.weights.row(i).sum()
    }

    pub(crate) fn neighbours(&self) -> Vec<Vec<usize>> {
        (0..self.n_nodes())
            .map(|i| (0..self.n_nodes()).filter(|&j| self.weights[[i, j]] > 0.0).collect())
            .collect()
    }

    /// Unordered label pairs of the edges, for set comparisons.
    pub fn edge_labels(&self) -> Vec<(String, String)> {
        self.edges()
            .into_iter()
            .map(|(i, j, _)| {
                let (a, b) = (&self.nodes[i].label, &self.nodes[j].label);
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            })
            .collect()
    }
}

/// Weight of a single pair; zero when not linked.
pub fn link_weight(p: f64, sign: i8, opts: &AdjacencyOptions) -> f64 {
    let admissible = sign > 0 || (opts.keep_negative && sign < 0);
    if p.is_nan() || !admissible || p >= opts.gamma {
        0.0
    } else {
        (opts.gamma - p) / opts.gamma
    }
}

pub fn build_adjacency(p: &PValueMatrix, opts: &AdjacencyOptions) -> Result<DependencyNetwork> {
    if !(opts.gamma > 0.0 && opts.gamma < 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", opts.gamma)));
    }
    let n = p.len();
    let weights = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            link_weight(p.p[[i, j]], p.sign[[i, j]], opts)
        }
    });
    Ok(DependencyNetwork {
        nodes: p.nodes.clone(),
        weights,
        gamma: opts.gamma,
        level: p.level,
    })
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::vocab::{Country, Sector};

    /// Unweighted network on generic nodes from an edge list.
    pub fn graph(n: usize, edges: &[(usize, usize)]) -> DependencyNetwork {
        let mut w = Array2::zeros((n, n));
        for &(a, b) in edges {
            w[[a, b]] = 1.0;
            w[[b, a]] = 1.0;
        }
        DependencyNetwork {
            nodes: (0..n)
                .map(|i| Node {
                    label: format!("N{i}"),
                    country: Country::ALL[i % 15],
                    sector: Some(Sector::ALL[i % 10]),
                })
                .collect(),
            weights: w,
            gamma: 0.1,
            level: Level::Sector,
        }
    }
}
