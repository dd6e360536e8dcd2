use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{align_meta, AssetMeta, PricePanel};
use crate::error::{Error, Result};
use crate::stats::median;
use crate::vocab::Country;

/// Calendar and liquidity screens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterRules {
    /// A date is retained only if every listed market traded on it.
    pub reference_countries: Vec<Country>,
    /// Optional explicit trading calendar, intersected with the reference markets.
    pub calendar: Option<Vec<NaiveDate>>,
    /// Drop assets inactive for more than this many consecutive retained days.
    pub max_consecutive_inactive: usize,
    /// Drop assets inactive on more than this fraction of retained days.
    pub max_inactive_fraction: f64,
    /// Penny-stock screen on the median price. Off by default.
    pub min_median_price: Option<f64>,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            reference_countries: vec![Country::Gbr, Country::Usa],
            calendar: None,
            max_consecutive_inactive: 10,
            max_inactive_fraction: 0.08,
            min_median_price: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    ConsecutiveInactivity { days: usize },
    InactiveFraction { fraction: f64 },
    PennyStock { median_price: f64 },
}

impl DropReason {
    pub fn label(&self) -> &'static str {
        match self {
            DropReason::ConsecutiveInactivity { .. } => "consecutive inactivity",
            DropReason::InactiveFraction { .. } => "inactive fraction",
            DropReason::PennyStock { .. } => "penny stock",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedAsset {
    pub asset_id: String,
    #[serde(flatten)]
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub dropped: Vec<DroppedAsset>,
    pub dates_removed: usize,
}

fn active(panel: &PricePanel, t: usize, j: usize) -> bool {
    let p = panel.prices[[t, j]];
    let v = panel.volumes[[t, j]];
    !p.is_nan() && (v.is_nan() || v > 0.0)
}

fn trading_days(panel: &PricePanel, meta: &[AssetMeta], rules: &FilterRules) -> Vec<usize> {
    let explicit: Option<BTreeSet<NaiveDate>> = rules.calendar.as_ref().map(|c| c.iter().copied().collect());
    let refs: Vec<Vec<usize>> = rules
        .reference_countries
        .iter()
        .map(|c| {
            meta.iter()
                .enumerate()
                .filter(|(_, m)| m.country == *c)
                .map(|(j, _)| j)
                .collect::<Vec<_>>()
        })
        .filter(|cols| !cols.is_empty())
        .collect();
    (0..panel.n_dates())
        .filter(|&t| {
            explicit.as_ref().map_or(true, |cal| cal.contains(&panel.dates[t]))
                && refs.iter().all(|cols| cols.iter().any(|&j| active(panel, t, j)))
        })
        .collect()
}

fn screen(panel: &PricePanel, j: usize, rules: &FilterRules) -> Option<DropReason> {
    let n = panel.n_dates();
    let mut run = 0usize;
    let mut longest = 0usize;
    let mut inactive = 0usize;
    for t in 0..n {
        if active(panel, t, j) {
            run = 0;
        } else {
            run += 1;
            inactive += 1;
            longest = longest.max(run);
        }
    }
    if longest > rules.max_consecutive_inactive {
        return Some(DropReason::ConsecutiveInactivity { days: longest });
    }
    let fraction = inactive as f64 / n.max(1) as f64;
    if fraction > rules.max_inactive_fraction {
        return Some(DropReason::InactiveFraction { fraction });
    }
    if let Some(min) = rules.min_median_price {
        let m = median(&panel.prices.column(j).to_vec());
        if m < min {
            return Some(DropReason::PennyStock { median_price: m });
        }
    }
    None
}

/// Restricts the panel to the common calendar of the reference markets and
/// drops assets failing the inactivity screens.
///
/// Calendar and screens are iterated until neither changes, so applying the
/// function to its own output is a no-op. A reference market with no assets in
/// the panel imposes no constraint.
pub fn align_and_filter(
    panel: &PricePanel,
    meta: &[AssetMeta],
    rules: &FilterRules,
) -> Result<(PricePanel, FilterReport)> {
    if !(0.0..=1.0).contains(&rules.max_inactive_fraction) {
        return Err(Error::Config("max_inactive_fraction must lie in [0, 1]".into()));
    }
    let mut current = panel.clone();
    let mut cur_meta = align_meta(&panel.assets, meta)?;
    let mut report = FilterReport::default();
    loop {
        let rows = trading_days(&current, &cur_meta, rules);
        if rows.is_empty() {
            return Err(Error::Config("no dates survive the calendar intersection".into()));
        }
        let all_cols: Vec<usize> = (0..current.n_assets()).collect();
        let dated = current.select(&rows, &all_cols);
        let mut keep = Vec::new();
        for j in 0..dated.n_assets() {
            match screen(&dated, j, rules) {
                None => keep.push(j),
                Some(reason) => report.dropped.push(DroppedAsset {
                    asset_id: dated.assets[j].clone(),
                    reason,
                }),
            }
        }
        let unchanged = rows.len() == current.n_dates() && keep.len() == current.n_assets();
        let all_rows: Vec<usize> = (0..dated.n_dates()).collect();
        current = dated.select(&all_rows, &keep);
        cur_meta = keep.iter().map(|&j| cur_meta[j].clone()).collect();
        if unchanged {
            break;
        }
    }
    report.dates_removed = panel.n_dates() - current.n_dates();
    Ok((current, report))
}
