//! Price panels, liquidity screens, log returns and descriptive statistics.

mod filter;
mod io;
mod returns;
mod stats;

use std::collections::HashMap;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{Country, Sector};

pub use filter::{align_and_filter, DropReason, DroppedAsset, FilterReport, FilterRules};
pub(crate) use io::fmt_cell;
pub use io::{load_prices, read_meta, write_meta, write_prices};
pub use returns::{aggregate_weekly, compute_log_returns, weekly_groups};
pub use stats::{descriptive_stats, hill_estimator, AssetStat, AssetStats, CountryStats, SectorCorr, StatsConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetMeta {
    pub asset_id: String,
    pub country: Country,
    pub sector: Sector,
}

/// Dates x assets closing prices and volumes. Missing cells are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub prices: Array2<f64>,
    pub volumes: Array2<f64>,
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, prices: Array2<f64>, volumes: Array2<f64>) -> Result<Self> {
        let shape = (dates.len(), assets.len());
        if prices.dim() != shape || volumes.dim() != shape {
            return Err(Error::Config(format!(
                "panel matrices must be {}x{}, got prices {:?} volumes {:?}",
                shape.0,
                shape.1,
                prices.dim(),
                volumes.dim()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("panel dates must be strictly increasing".into()));
        }
        for ((t, a), &p) in prices.indexed_iter() {
            if !p.is_nan() && !(p > 0.0 && p.is_finite()) {
                return Err(Error::Validation {
                    asset: assets[a].clone(),
                    date: dates[t],
                    message: format!("price {p} is not strictly positive"),
                });
            }
        }
        Ok(PricePanel {
            dates,
            assets,
            prices,
            volumes,
        })
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Keeps the given date rows and asset columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> PricePanel {
        PricePanel {
            dates: rows.iter().map(|&r| self.dates[r]).collect(),
            assets: cols.iter().map(|&c| self.assets[c].clone()).collect(),
            prices: Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| self.prices[[rows[i], cols[j]]]),
            volumes: Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| self.volumes[[rows[i], cols[j]]]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Daily,
    Weekly,
}

impl Frequency {
    pub fn as_str(self) -> &'static str {
        match self {
            Frequency::Daily => "daily",
            Frequency::Weekly => "weekly",
        }
    }
}

/// Dates x assets log returns. Missing cells are `NaN`; no infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub returns: Array2<f64>,
    pub frequency: Frequency,
}

impl ReturnPanel {
    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// Column `a` as an owned vector.
    pub fn series(&self, a: usize) -> Vec<f64> {
        self.returns.column(a).to_vec()
    }

    /// Rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> ReturnPanel {
        ReturnPanel {
            dates: self.dates[start..end].to_vec(),
            assets: self.assets.clone(),
            returns: self.returns.slice(ndarray::s![start..end, ..]).to_owned(),
            frequency: self.frequency,
        }
    }

    pub fn select_assets(&self, cols: &[usize]) -> ReturnPanel {
        ReturnPanel {
            dates: self.dates.clone(),
            assets: cols.iter().map(|&c| self.assets[c].clone()).collect(),
            returns: Array2::from_shape_fn((self.n_obs(), cols.len()), |(t, j)| self.returns[[t, cols[j]]]),
            frequency: self.frequency,
        }
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        io::write_wide(path, &self.dates, &self.assets, &self.returns)
    }

    pub fn read_csv(path: &std::path::Path, frequency: Frequency) -> Result<ReturnPanel> {
        let (dates, assets, returns) = io::read_wide(path)?;
        Ok(ReturnPanel {
            dates,
            assets,
            returns,
            frequency,
        })
    }
}

/// Metadata records in the order of `assets`. Fails listing every orphan id.
pub fn align_meta(assets: &[String], meta: &[AssetMeta]) -> Result<Vec<AssetMeta>> {
    let by_id: HashMap<&str, &AssetMeta> = meta.iter().map(|m| (m.asset_id.as_str(), m)).collect();
    let mut out = Vec::with_capacity(assets.len());
    let mut orphans = Vec::new();
    for a in assets {
        match by_id.get(a.as_str()) {
            Some(m) => out.push((*m).clone()),
            None => orphans.push(a.clone()),
        }
    }
    if orphans.is_empty() {
        Ok(out)
    } else {
        Err(Error::MissingMeta(orphans))
    }
}
