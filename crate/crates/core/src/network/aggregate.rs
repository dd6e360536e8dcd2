//! Group-level p-values: country-sector cells or whole countries.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairwise::{Level, Node, PValueMatrix};
use crate::stats::median;
use crate::vocab::{Country, Sector};

fn group_key(node: &Node, level: Level) -> Result<(Country, Option<Sector>)> {
    match level {
        Level::Country => Ok((node.country, None)),
        Level::Sector => node
            .sector
            .map(|s| (node.country, Some(s)))
            .ok_or_else(|| Error::Config(format!("node {} has no sector", node.label))),
        Level::Stock => Err(Error::Config("cannot aggregate to stock level".into())),
    }
}

fn group_label(key: (Country, Option<Sector>)) -> String {
    match key.1 {
        Some(s) => format!("{}_{}", key.0.code(), s.short()),
        None => key.0.code().to_string(),
    }
}

/// Averages stock-pair p-values over groups.
///
/// Each off-diagonal group entry is the mean over every defined stock pair
/// with one member in each group; two cells of the same country are ordinary
/// group pairs. Groups smaller than `min_group_size` are dropped. The sign of a
/// group pair is the majority sign of its stock pairs.
pub fn aggregate_groups(p: &PValueMatrix, level: Level, min_group_size: usize) -> Result<PValueMatrix> {
    if p.level != Level::Stock {
        return Err(Error::Config(format!(
            "expected a stock-level matrix, got {}",
            p.level.as_str()
        )));
    }
    let mut members: BTreeMap<(Country, Option<Sector>), Vec<usize>> = BTreeMap::new();
    for (i, node) in p.nodes.iter().enumerate() {
        members.entry(group_key(node, level)?).or_default().push(i);
    }
    let groups: Vec<((Country, Option<Sector>), Vec<usize>)> = members
        .into_iter()
        .filter(|(_, m)| m.len() >= min_group_size.max(1))
        .collect();
    let k = groups.len();
    let mut out_p = Array2::from_elem((k, k), f64::NAN);
    let mut out_s = Array2::zeros((k, k));
    for a in 0..k {
        for b in a + 1..k {
            let (mut sum, mut cnt, mut votes) = (0.0, 0usize, 0i64);
            for &i in &groups[a].1 {
                for &j in &groups[b].1 {
                    let v = p.p[[i, j]];
                    if !v.is_nan() {
                        sum += v;
                        cnt += 1;
                        votes += i64::from(p.sign[[i, j]]);
                    }
                }
            }
            if cnt > 0 {
                let m = sum / cnt as f64;
                let s = votes.signum() as i8;
                out_p[[a, b]] = m;
                out_p[[b, a]] = m;
                out_s[[a, b]] = s;
                out_s[[b, a]] = s;
            }
        }
    }
    Ok(PValueMatrix {
        nodes: groups
            .iter()
            .map(|(key, _)| Node {
                label: group_label(*key),
                country: key.0,
                sector: key.1,
            })
            .collect(),
        p: out_p,
        sign: out_s,
        frequency: p.frequency,
        level,
    })
}

/// Country-pair medians of stock-level and of sector-averaged p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryMedians {
    pub countries: Vec<Country>,
    /// Median over all stock pairs between the two countries.
    pub stock: Array2<f64>,
    /// Median over country-sector cell pairs after averaging within cells.
    pub sector: Array2<f64>,
}

pub fn country_pair_medians(p: &PValueMatrix, min_group_size: usize) -> Result<CountryMedians> {
    let k = Country::ALL.len();
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); k * k];
    let collect = |m: &PValueMatrix, buckets: &mut Vec<Vec<f64>>| {
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                let v = m.p[[i, j]];
                if !v.is_nan() {
                    let (a, b) = (m.nodes[i].country.index(), m.nodes[j].country.index());
                    buckets[a * k + b].push(v);
                    if a != b {
                        buckets[b * k + a].push(v);
                    }
                }
            }
        }
    };
    collect(p, &mut buckets);
    let stock = Array2::from_shape_fn((k, k), |(a, b)| median(&buckets[a * k + b]));
    let sectors = aggregate_groups(p, Level::Sector, min_group_size)?;
    buckets.iter_mut().for_each(Vec::clear);
    collect(&sectors, &mut buckets);
    let sector = Array2::from_shape_fn((k, k), |(a, b)| median(&buckets[a * k + b]));
    Ok(CountryMedians {
        countries: Country::ALL.to_vec(),
        stock,
        sector,
    })
}
