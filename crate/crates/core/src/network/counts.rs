//! Link bookkeeping by country and by sector.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::DependencyNetwork;
use crate::vocab::{Country, Sector};

/// Every link adds one to each endpoint's country and sector, so the
/// country and sector totals are both twice the number of links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCounts {
    pub links: usize,
    /// Indexed like [`Country::ALL`].
    pub by_country: Vec<usize>,
    /// Indexed like [`Sector::ALL`].
    pub by_sector: Vec<usize>,
    /// Symmetric sector x sector link counts; a same-sector link adds one to the diagonal.
    pub sector_matrix: Array2<usize>,
}

impl LinkCounts {
    fn fractions(v: &[usize], links: usize) -> Vec<f64> {
        v.iter()
            .map(|&c| if links == 0 { 0.0 } else { c as f64 / (2 * links) as f64 })
            .collect()
    }

    pub fn country_fractions(&self) -> Vec<f64> {
        Self::fractions(&self.by_country, self.links)
    }

    pub fn sector_fractions(&self) -> Vec<f64> {
        Self::fractions(&self.by_sector, self.links)
    }

    /// Sectors sorted by descending row total of the sector matrix; ties keep vocabulary order.
    pub fn sector_order(&self) -> Vec<Sector> {
        let mut idx: Vec<usize> = (0..Sector::ALL.len()).collect();
        let total = |s: usize| self.sector_matrix.row(s).sum();
        idx.sort_by_key(|&s| std::cmp::Reverse(total(s)));
        idx.into_iter().map(|s| Sector::ALL[s]).collect()
    }

    pub fn country(&self, c: Country) -> usize {
        self.by_country[c.index()]
    }

    pub fn sector(&self, s: Sector) -> usize {
        self.by_sector[s.index()]
    }
}

pub fn significant_link_counts(net: &DependencyNetwork) -> LinkCounts {
    let ns = Sector::ALL.len();
    let mut c = LinkCounts {
        links: 0,
        by_country: vec![0; Country::ALL.len()],
        by_sector: vec![0; ns],
        sector_matrix: Array2::zeros((ns, ns)),
    };
    for (i, j, _) in net.edges() {
        let (a, b) = (&net.nodes[i], &net.nodes[j]);
        c.links += 1;
        c.by_country[a.country.index()] += 1;
        c.by_country[b.country.index()] += 1;
        if let (Some(sa), Some(sb)) = (a.sector, b.sector) {
            let (x, y) = (sa.index(), sb.index());
            c.by_sector[x] += 1;
            c.by_sector[y] += 1;
            c.sector_matrix[[x, y]] += 1;
            if x != y {
                c.sector_matrix[[y, x]] += 1;
            }
        }
    }
    c
}
