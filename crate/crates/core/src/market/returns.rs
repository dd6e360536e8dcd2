use std::ops::Range;

use chrono::{Datelike, NaiveDate};
use ndarray::Array2;

use super::{Frequency, PricePanel, ReturnPanel};
use crate::error::{Error, Result};

/// `r_t = ln p_t - ln p_{t-1}`; the first date is dropped and a missing price
/// on either side gives a missing return.
pub fn compute_log_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let n = panel.n_dates();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "log returns need at least 2 dates, panel has {n}"
        )));
    }
    for ((t, j), &p) in panel.prices.indexed_iter() {
        if !p.is_nan() && p <= 0.0 {
            return Err(Error::Domain(format!(
                "log of non-positive price {p} for {} on {}",
                panel.assets[j], panel.dates[t]
            )));
        }
    }
    let k = panel.n_assets();
    let returns = Array2::from_shape_fn((n - 1, k), |(t, j)| {
        let (p0, p1) = (panel.prices[[t, j]], panel.prices[[t + 1, j]]);
        if p0.is_nan() || p1.is_nan() {
            f64::NAN
        } else {
            p1.ln() - p0.ln()
        }
    });
    Ok(ReturnPanel {
        dates: panel.dates[1..].to_vec(),
        assets: panel.assets.clone(),
        returns,
        frequency: Frequency::Daily,
    })
}

/// Row ranges of consecutive dates sharing an ISO-8601 week.
pub fn weekly_groups(dates: &[NaiveDate]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=dates.len() {
        if t == dates.len() || dates[t].iso_week() != dates[start].iso_week() {
            if t > start {
                out.push(start..t);
            }
            start = t;
        }
    }
    out
}

/// Sums daily log returns within each ISO week. The weekly date is the last
/// trading day of the week; a week where an asset has no return stays missing.
pub fn aggregate_weekly(panel: &ReturnPanel) -> Result<ReturnPanel> {
    if panel.frequency != Frequency::Daily {
        return Err(Error::Config("weekly aggregation expects a daily panel".into()));
    }
    let groups = weekly_groups(&panel.dates);
    let returns = Array2::from_shape_fn((groups.len(), panel.n_assets()), |(w, j)| {
        let mut sum = 0.0;
        let mut any = false;
        for t in groups[w].clone() {
            let r = panel.returns[[t, j]];
            if !r.is_nan() {
                sum += r;
                any = true;
            }
        }
        if any {
            sum
        } else {
            f64::NAN
        }
    });
    Ok(ReturnPanel {
        dates: groups.iter().map(|g| panel.dates[g.end - 1]).collect(),
        assets: panel.assets.clone(),
        returns,
        frequency: Frequency::Weekly,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn price_panel(path: &[f64]) -> PricePanel {
        let n = path.len();
        let dates = (0..n).map(|i| d(2020, 1, 6) + chrono::Days::new(i as u64)).collect();
        PricePanel::new(
            dates,
            vec!["a".into()],
            Array2::from_shape_vec((n, 1), path.to_vec()).unwrap(),
            Array2::from_elem((n, 1), f64::NAN),
        )
        .unwrap()
    }

    #[test]
    fn constant_price_zero_return() {
        let r = compute_log_returns(&price_panel(&[100.0, 100.0])).unwrap();
        assert_eq!(r.returns[[0, 0]], 0.0);
    }

    #[test]
    fn five_percent_move() {
        let r = compute_log_returns(&price_panel(&[100.0, 105.0])).unwrap();
        assert_abs_diff_eq!(r.returns[[0, 0]], 0.048790, epsilon = 5e-7);
        assert_abs_diff_eq!(r.returns[[0, 0]], 1.05f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn shape_and_missing_propagation() {
        let r = compute_log_returns(&price_panel(&[1.0, f64::NAN, 2.0, 3.0])).unwrap();
        assert_eq!(r.n_obs(), 3);
        assert!(r.returns[[0, 0]].is_nan());
        assert!(r.returns[[1, 0]].is_nan());
        assert_abs_diff_eq!(r.returns[[2, 0]], 1.5f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn single_date_rejected() {
        assert!(compute_log_returns(&price_panel(&[1.0])).is_err());
    }

    fn daily(dates: Vec<NaiveDate>, vals: Vec<f64>) -> ReturnPanel {
        let n = dates.len();
        ReturnPanel {
            dates,
            assets: vec!["a".into()],
            returns: Array2::from_shape_vec((n, 1), vals).unwrap(),
            frequency: Frequency::Daily,
        }
    }

    #[test]
    fn weekly_sum_within_one_week() {
        // Mon 2020-01-06 .. Wed 2020-01-08
        let p = daily(
            vec![d(2020, 1, 6), d(2020, 1, 7), d(2020, 1, 8)],
            vec![0.01, -0.02, 0.005],
        );
        let w = aggregate_weekly(&p).unwrap();
        assert_eq!(w.n_obs(), 1);
        assert_abs_diff_eq!(w.returns[[0, 0]], -0.005, epsilon = 1e-15);
        assert_eq!(w.frequency, Frequency::Weekly);
        assert_eq!(w.dates[0], d(2020, 1, 8));
    }

    #[test]
    fn singleton_week_and_missing_week() {
        let p = daily(
            vec![d(2020, 1, 10), d(2020, 1, 13), d(2020, 1, 14)],
            vec![0.03, f64::NAN, f64::NAN],
        );
        let w = aggregate_weekly(&p).unwrap();
        assert_eq!(w.n_obs(), 2);
        assert_eq!(w.returns[[0, 0]], 0.03);
        assert!(w.returns[[1, 0]].is_nan());
    }

    #[test]
    fn iso_week_spans_new_year() {
        // 2020-12-31 (Thu) and 2021-01-01 (Fri) are both in ISO week 2020-W53
        let p = daily(vec![d(2020, 12, 31), d(2021, 1, 1), d(2021, 1, 4)], vec![0.1, 0.2, 0.3]);
        let w = aggregate_weekly(&p).unwrap();
        assert_eq!(w.n_obs(), 2);
        assert_abs_diff_eq!(w.returns[[0, 0]], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn weekly_rejects_weekly_input() {
        let mut p = daily(vec![d(2020, 1, 6)], vec![0.0]);
        p.frequency = Frequency::Weekly;
        assert!(aggregate_weekly(&p).is_err());
    }

    #[test]
    fn sample_span_yields_365_weeks() {
        // Weekdays from 2006-07-03 to 2013-06-28, thinned to 1330 price dates
        // (1329 returns) with every ISO week keeping at least one day.
        let mut weekdays = Vec::new();
        let mut day = d(2006, 7, 3);
        while day <= d(2013, 6, 28) {
            if day.weekday().number_from_monday() <= 5 {
                weekdays.push(day);
            }
            day = day + chrono::Days::new(1);
        }
        let groups = weekly_groups(&weekdays);
        let excess = weekdays.len() - 1330;
        let mut drop = std::collections::BTreeSet::new();
        // drop Wednesdays, then Tuesdays, until the count is met
        'outer: for target in [3u32, 2] {
            for g in &groups {
                for t in g.clone() {
                    if drop.len() == excess {
                        break 'outer;
                    }
                    if weekdays[t].weekday().number_from_monday() == target {
                        drop.insert(t);
                    }
                }
            }
        }
        let kept: Vec<NaiveDate> = weekdays
            .iter()
            .enumerate()
            .filter(|(i, _)| !drop.contains(i))
            .map(|(_, d)| *d)
            .collect();
        assert_eq!(kept.len(), 1330);
        let prices: Vec<f64> = (0..kept.len()).map(|i| 100.0 + i as f64).collect();
        let n = kept.len();
        let panel = PricePanel::new(
            kept,
            vec!["a".into()],
            Array2::from_shape_vec((n, 1), prices).unwrap(),
            Array2::from_elem((n, 1), 1.0),
        )
        .unwrap();
        let daily = compute_log_returns(&panel).unwrap();
        assert_eq!(daily.n_obs(), 1329);
        assert_eq!(aggregate_weekly(&daily).unwrap().n_obs(), 365);
    }

    proptest! {
        #[test]
        fn weekly_preserves_total(vals in proptest::collection::vec(-0.1f64..0.1, 1..120),
                                  holes in proptest::collection::vec(any::<bool>(), 120)) {
            let n = vals.len();
            let dates: Vec<NaiveDate> = (0..n).map(|i| d(2019, 12, 20) + chrono::Days::new(i as u64)).collect();
            let v: Vec<f64> = vals.iter().zip(&holes).map(|(x, h)| if *h { f64::NAN } else { *x }).collect();
            let p = daily(dates, v.clone());
            let w = aggregate_weekly(&p).unwrap();
            let total_d: f64 = v.iter().filter(|x| !x.is_nan()).sum();
            let total_w: f64 = w.returns.iter().filter(|x| !x.is_nan()).sum();
            prop_assert!((total_d - total_w).abs() < 1e-12);
        }
    }
}
