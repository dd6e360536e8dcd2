use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{align_meta, AssetMeta, ReturnPanel};
use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::stats::{kurtosis, pearson, present, sample_variance};
use crate::vocab::{Country, Sector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsConfig {
    /// Hill order statistics as a fraction of the sample, `k = ceil(f * n)`.
    pub hill_fraction: f64,
    /// Markets with daily price limits; tail exponents are not reported for them.
    pub capped_countries: Vec<Country>,
    pub min_obs: usize,
    pub exec: Execution,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            hill_fraction: 0.05,
            capped_countries: vec![Country::Chn, Country::Ind, Country::Kor],
            min_obs: 30,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetStat {
    pub asset_id: String,
    pub n_obs: usize,
    pub variance: f64,
    /// Non-excess; `None` for a constant series.
    pub kurtosis: Option<f64>,
    pub tail_exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorCorr {
    pub country: Country,
    pub sector: Sector,
    pub n_assets: usize,
    pub n_pairs: usize,
    pub mean_corr: f64,
}

/// Pooled statistics for one market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryStats {
    pub country: Country,
    pub n_stocks: usize,
    pub variance: f64,
    pub kurtosis: Option<f64>,
    pub tail_exponent: Option<f64>,
    /// Mean correlation over all same-sector pairs in the market.
    pub within_sector_corr: f64,
    /// Mean correlation over all pairs in the market.
    pub overall_corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetStats {
    pub assets: Vec<AssetStat>,
    pub sectors: Vec<SectorCorr>,
    pub countries: Vec<CountryStats>,
}

impl AssetStats {
    /// Per-country table with the columns of the descriptive-statistics summary.
    pub fn write_country_csv(&self, path: &std::path::Path) -> Result<()> {
        use std::io::Write;
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        let io = |e| Error::io(path, e);
        let opt = |x: Option<f64>| x.map(|v| format!("{v}")).unwrap_or_default();
        let nan = |x: f64| if x.is_nan() { String::new() } else { format!("{x}") };
        writeln!(w, "# table2_stats").map_err(io)?;
        writeln!(
            w,
            "country,n_stocks,var_r,kurtosis,tail_exponent,avg_corr_within_sector,avg_corr_all"
        )
        .map_err(io)?;
        for c in &self.countries {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.country,
                c.n_stocks,
                nan(c.variance),
                opt(c.kurtosis),
                opt(c.tail_exponent),
                nan(c.within_sector_corr),
                nan(c.overall_corr)
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Hill tail-index estimate from the `k` largest absolute values.
///
/// `alpha = k / sum_{i<k} ln(x_(i) / x_(k))` with `x_(0) >= x_(1) >= ...`.
pub fn hill_estimator(xs: &[f64], k: usize) -> Option<f64> {
    let mut a: Vec<f64> = xs.iter().filter(|x| !x.is_nan()).map(|x| x.abs()).collect();
    if k == 0 || a.len() <= k {
        return None;
    }
    a.sort_by(|x, y| y.total_cmp(x));
    let threshold = a[k];
    if threshold <= 0.0 {
        return None;
    }
    let s: f64 = a[..k].iter().map(|x| (x / threshold).ln()).sum();
    (s > 0.0).then(|| k as f64 / s)
}

fn hill_k(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).max(1)
}

fn mean_of(v: &[f64]) -> f64 {
    let p = present(v);
    if p.is_empty() {
        f64::NAN
    } else {
        p.iter().sum::<f64>() / p.len() as f64
    }
}

/// Per-asset moments and tail index, per country-sector mean correlations and
/// the pooled per-country summary.
pub fn descriptive_stats(panel: &ReturnPanel, meta: &[AssetMeta], cfg: &StatsConfig) -> Result<AssetStats> {
    let meta = align_meta(&panel.assets, meta)?;
    let series: Vec<Vec<f64>> = (0..panel.n_assets()).map(|j| panel.series(j)).collect();
    for (j, s) in series.iter().enumerate() {
        let n = s.iter().filter(|x| !x.is_nan()).count();
        if n < cfg.min_obs {
            return Err(Error::InsufficientData(format!(
                "asset {} has {n} observations, need {}",
                panel.assets[j], cfg.min_obs
            )));
        }
    }

    let assets: Vec<AssetStat> = series
        .iter()
        .zip(&meta)
        .map(|(s, m)| {
            let x = present(s);
            let capped = cfg.capped_countries.contains(&m.country);
            AssetStat {
                asset_id: m.asset_id.clone(),
                n_obs: x.len(),
                variance: sample_variance(&x),
                kurtosis: kurtosis(&x),
                tail_exponent: if capped {
                    None
                } else {
                    hill_estimator(&x, hill_k(x.len(), cfg.hill_fraction))
                },
            }
        })
        .collect();

    let mut by_country: BTreeMap<Country, Vec<usize>> = BTreeMap::new();
    for (j, m) in meta.iter().enumerate() {
        by_country.entry(m.country).or_default().push(j);
    }

    let mut sectors = Vec::new();
    let mut countries = Vec::new();
    for (&country, cols) in &by_country {
        let pairs: Vec<(usize, usize)> = crate::exec::upper_pairs(cols.len())
            .into_iter()
            .map(|(a, b)| (cols[a], cols[b]))
            .collect();
        let corrs = map_indices(pairs.len(), cfg.exec, |k| {
            let (i, j) = pairs[k];
            pearson(&series[i], &series[j])
        });

        let mut per_sector: BTreeMap<Sector, (usize, Vec<f64>)> = BTreeMap::new();
        for &j in cols {
            per_sector.entry(meta[j].sector).or_default().0 += 1;
        }
        for (&(i, j), &c) in pairs.iter().zip(&corrs) {
            if meta[i].sector == meta[j].sector {
                per_sector.get_mut(&meta[i].sector).unwrap().1.push(c);
            }
        }
        // pair-count weighted mean of sector means equals the mean over all same-sector pairs
        let (mut wsum, mut wn) = (0.0, 0usize);
        for (&sector, (n_assets, cs)) in &per_sector {
            let valid = present(cs);
            let m = mean_of(cs);
            if !valid.is_empty() {
                wsum += m * valid.len() as f64;
                wn += valid.len();
            }
            sectors.push(SectorCorr {
                country,
                sector,
                n_assets: *n_assets,
                n_pairs: valid.len(),
                mean_corr: m,
            });
        }

        let pooled: Vec<f64> = cols.iter().flat_map(|&j| present(&series[j])).collect();
        countries.push(CountryStats {
            country,
            n_stocks: cols.len(),
            variance: sample_variance(&pooled),
            kurtosis: kurtosis(&pooled),
            tail_exponent: if cfg.capped_countries.contains(&country) {
                None
            } else {
                hill_estimator(&pooled, hill_k(pooled.len(), cfg.hill_fraction))
            },
            within_sector_corr: if wn > 0 { wsum / wn as f64 } else { f64::NAN },
            overall_corr: mean_of(&corrs),
        });
    }

    Ok(AssetStats {
        assets,
        sectors,
        countries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Frequency;
    use chrono::NaiveDate;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn panel_from(cols: Vec<Vec<f64>>) -> ReturnPanel {
        let n = cols[0].len();
        let k = cols.len();
        let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        ReturnPanel {
            dates: (0..n).map(|i| start + chrono::Days::new(i as u64)).collect(),
            assets: (0..k).map(|i| format!("a{i}")).collect(),
            returns: Array2::from_shape_fn((n, k), |(t, j)| cols[j][t]),
            frequency: Frequency::Daily,
        }
    }

    fn meta_of(spec: &[(Country, Sector)]) -> Vec<AssetMeta> {
        spec.iter()
            .enumerate()
            .map(|(i, &(country, sector))| AssetMeta {
                asset_id: format!("a{i}"),
                country,
                sector,
            })
            .collect()
    }

    fn pareto_signed(rng: &mut ChaCha8Rng, alpha: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>();
                let x = (1.0 - u).powf(-1.0 / alpha);
                if rng.random::<bool>() {
                    x
                } else {
                    -x
                }
            })
            .collect()
    }

    #[test]
    fn normal_kurtosis_near_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let k = kurtosis(&x).unwrap();
        assert!((2.7..=3.3).contains(&k), "kurtosis {k}");
    }

    #[test]
    fn hill_recovers_pareto_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = pareto_signed(&mut rng, 3.0, 5000);
        let a = hill_estimator(&x, hill_k(5000, 0.05)).unwrap();
        assert!((2.6..=3.4).contains(&a), "hill {a}");
    }

    #[test]
    fn hill_median_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut est: Vec<f64> = (0..100)
            .map(|_| {
                let x = pareto_signed(&mut rng, 3.0, 10_000);
                hill_estimator(&x, hill_k(10_000, 0.05)).unwrap()
            })
            .collect();
        est.sort_by(f64::total_cmp);
        let med = 0.5 * (est[49] + est[50]);
        assert!((med - 3.0).abs() < 0.3, "median {med}");
    }

    #[test]
    fn identical_assets_within_sector_corr_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = panel_from(vec![x.clone(), x]);
        let m = meta_of(&[(Country::Usa, Sector::Energy), (Country::Usa, Sector::Energy)]);
        let s = descriptive_stats(&p, &m, &StatsConfig::default()).unwrap();
        assert!((s.countries[0].within_sector_corr - 1.0).abs() < 1e-12);
        assert!((s.sectors[0].mean_corr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hierarchical_average_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = [
            (Country::Fra, Sector::Energy),
            (Country::Fra, Sector::Energy),
            (Country::Fra, Sector::Energy),
            (Country::Fra, Sector::Utilities),
            (Country::Fra, Sector::Utilities),
            (Country::Fra, Sector::Financials),
            (Country::Fra, Sector::Financials),
            (Country::Fra, Sector::Financials),
            (Country::Fra, Sector::Financials),
        ];
        let common: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
        let cols: Vec<Vec<f64>> = (0..spec.len())
            .map(|_| {
                common
                    .iter()
                    .map(|c| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        0.5 * c + e
                    })
                    .collect()
            })
            .collect();
        let p = panel_from(cols.clone());
        let m = meta_of(&spec);
        let s = descriptive_stats(&p, &m, &StatsConfig::default()).unwrap();

        let (mut sum, mut n) = (0.0, 0);
        for i in 0..spec.len() {
            for j in i + 1..spec.len() {
                if spec[i].1 == spec[j].1 {
                    sum += pearson(&cols[i], &cols[j]);
                    n += 1;
                }
            }
        }
        assert_eq!(n, 3 + 1 + 6);
        assert!((s.countries[0].within_sector_corr - sum / n as f64).abs() < 1e-12);
    }

    #[test]
    fn capped_markets_have_no_tail_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = panel_from(vec![x.clone(), x]);
        let m = meta_of(&[(Country::Kor, Sector::Energy), (Country::Usa, Sector::Energy)]);
        let s = descriptive_stats(&p, &m, &StatsConfig::default()).unwrap();
        assert!(s.assets[0].tail_exponent.is_none());
        assert!(s.assets[1].tail_exponent.unwrap() > 0.0);
        assert!(s.assets.iter().all(|a| a.variance >= 0.0 && a.kurtosis.unwrap() >= 1.0));
    }

    #[test]
    fn constant_series_flags_kurtosis() {
        let p = panel_from(vec![vec![0.01; 40]]);
        let m = meta_of(&[(Country::Usa, Sector::Energy)]);
        let s = descriptive_stats(&p, &m, &StatsConfig::default()).unwrap();
        assert_eq!(s.assets[0].variance, 0.0);
        assert!(s.assets[0].kurtosis.is_none());
    }

    #[test]
    fn too_short_rejected() {
        let p = panel_from(vec![vec![0.01; 10]]);
        let m = meta_of(&[(Country::Usa, Sector::Energy)]);
        assert!(descriptive_stats(&p, &m, &StatsConfig::default()).is_err());
    }
}
