//! Node partitions, modularity and the assortativity coefficient.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::DependencyNetwork;
use crate::error::{Error, Result};
use crate::pairwise::Node;
use crate::vocab::{Country, Sector};

/// Group id per node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub groups: Vec<usize>,
}

impl Partition {
    pub fn new(groups: Vec<usize>) -> Partition {
        Partition { groups }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.iter().collect::<BTreeSet<_>>().len()
    }
}

fn check(net: &DependencyNetwork, part: &Partition) -> Result<f64> {
    if part.groups.len() != net.n_nodes() {
        return Err(Error::Config(format!(
            "partition covers {} nodes, network has {}",
            part.groups.len(),
            net.n_nodes()
        )));
    }
    let two_m = net.weights.sum();
    if !(two_m > 0.0) {
        return Err(Error::Undefined("modularity of a network without links".into()));
    }
    Ok(two_m)
}

/// Group totals of weighted degree and of within-group weight.
fn group_sums(net: &DependencyNetwork, part: &Partition) -> (f64, f64) {
    let mut strength: BTreeMap<usize, f64> = BTreeMap::new();
    let mut inside = 0.0;
    for i in 0..net.n_nodes() {
        *strength.entry(part.groups[i]).or_default() += net.strength(i);
        for j in 0..net.n_nodes() {
            if part.groups[i] == part.groups[j] {
                inside += net.weights[[i, j]];
            }
        }
    }
    (inside, strength.values().map(|s| s * s).sum())
}

/// Weighted Newman modularity.
pub fn modularity(net: &DependencyNetwork, part: &Partition) -> Result<f64> {
    let two_m = check(net, part)?;
    let (inside, k2) = group_sums(net, part);
    Ok(inside / two_m - k2 / (two_m * two_m))
}

/// `Q / Q_max` with `Q_max = 1 - sum over groups of (strength / 2m)^2`, clipped to `[-1, 1]`.
pub fn assortativity(net: &DependencyNetwork, part: &Partition) -> Result<f64> {
    let two_m = check(net, part)?;
    let (inside, k2) = group_sums(net, part);
    let expected = k2 / (two_m * two_m);
    let q_max = 1.0 - expected;
    if q_max.abs() <= 1e-12 {
        return Err(Error::Undefined("all links fall inside a single group".into()));
    }
    Ok(((inside / two_m - expected) / q_max).clamp(-1.0, 1.0))
}

/// Regional and sectoral grouping hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Hypothesis {
    /// West against East.
    A,
    /// America, Europe, Asia.
    B,
    /// Developed against developing markets.
    C,
    /// Energy, materials, utilities and financials against the other sectors.
    D,
    /// The sectors of `D` split by the regions of `B`, everything else in a fourth group.
    E,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 5] = [
        Hypothesis::A,
        Hypothesis::B,
        Hypothesis::C,
        Hypothesis::D,
        Hypothesis::E,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::A => "A",
            Hypothesis::B => "B",
            Hypothesis::C => "C",
            Hypothesis::D => "D",
            Hypothesis::E => "E",
        }
    }
}

fn west_east(c: Country) -> usize {
    use Country::*;
    match c {
        Bra | Esp | Fra | Gbr | Usa | Can | Ger | Nld => 0,
        Chn | Hkg | Ind | Kor | Sgp | Jpn | Aus => 1,
    }
}

fn region(c: Country) -> usize {
    use Country::*;
    match c {
        Bra | Usa | Can => 0,
        Esp | Fra | Gbr | Ger | Nld => 1,
        Chn | Hkg | Ind | Jpn | Sgp | Kor | Aus => 2,
    }
}

fn development(c: Country) -> usize {
    use Country::*;
    match c {
        Aus | Esp | Fra | Gbr | Jpn | Nld | Usa | Can | Ger | Hkg => 0,
        Bra | Chn | Ind | Kor | Sgp => 1,
    }
}

fn resource_financial(s: Sector) -> bool {
    matches!(
        s,
        Sector::Energy | Sector::Materials | Sector::Utilities | Sector::Financials
    )
}

pub fn hypothesis_partition(nodes: &[Node], h: Hypothesis) -> Result<Partition> {
    let sector = |n: &Node| {
        n.sector
            .ok_or_else(|| Error::Config(format!("hypothesis {} needs a sector for node {}", h.name(), n.label)))
    };
    let groups = nodes
        .iter()
        .map(|n| {
            Ok(match h {
                Hypothesis::A => west_east(n.country),
                Hypothesis::B => region(n.country),
                Hypothesis::C => development(n.country),
                Hypothesis::D => usize::from(!resource_financial(sector(n)?)),
                Hypothesis::E => {
                    if resource_financial(sector(n)?) {
                        region(n.country)
                    } else {
                        3
                    }
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition::new(groups))
}

/// User-defined grouping by country, by sector, or by both (one group per combination).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CustomPartition {
    pub countries: BTreeMap<Country, usize>,
    pub sectors: BTreeMap<Sector, usize>,
}

impl CustomPartition {
    pub fn partition(&self, nodes: &[Node]) -> Result<Partition> {
        if self.countries.is_empty() && self.sectors.is_empty() {
            return Err(Error::Config("partition assigns no countries or sectors".into()));
        }
        let width = self.sectors.values().max().map_or(1, |m| m + 1);
        let groups = nodes
            .iter()
            .map(|n| {
                let c = if self.countries.is_empty() {
                    Some(0)
                } else {
                    self.countries.get(&n.country).copied()
                };
                let s = if self.sectors.is_empty() {
                    Some(0)
                } else {
                    n.sector.and_then(|s| self.sectors.get(&s).copied())
                };
                match (c, s) {
                    (Some(c), Some(s)) => Ok(c * width + s),
                    _ => Err(Error::Config(format!(
                        "node {} is not covered by the partition",
                        n.label
                    ))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Partition::new(groups))
    }
}
