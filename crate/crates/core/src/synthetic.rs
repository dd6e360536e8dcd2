//! Synthetic panels with known GARCH dynamics and planted factor structure.
//!
//! Standardized shocks follow a global + country + sector factor model,
//!
//! ```text
//! z_it = g_i(t) G_t + c_i(t) C_{country(i),t} + s_i(t) S_{sector(i),t} + sqrt(1 - g^2 - c^2 - s^2) e_it
//! ```
//!
//! with every factor and idiosyncratic draw unit-variance from the configured
//! innovation law. Sector factors are shared across countries. Returns are
//! `r_t = sqrt(h_t) z_t` with a GARCH(1,1) variance per asset.
//!
//! Random draws use one ChaCha stream for the factors and one per asset, so the
//! output depends only on the `SyntheticSpec` and its seed, never on thread scheduling.

use std::path::Path;

use chrono::{Datelike, NaiveDate};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::market::{AssetMeta, Frequency, PricePanel, ReturnPanel};
use crate::vocab::{Country, Sector};

const BURN_IN: usize = 500;
const VOLUME: f64 = 1.0e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Innovation {
    Gaussian,
    StudentT { nu: f64 },
}

impl Default for Innovation {
    fn default() -> Self {
        Innovation::StudentT { nu: 5.0 }
    }
}

impl Innovation {
    fn sampler(self) -> Result<Sampler> {
        match self {
            Innovation::Gaussian => Ok(Sampler::Gaussian),
            Innovation::StudentT { nu } if nu > 2.0 => Ok(Sampler::T(
                StudentT::new(nu).map_err(|e| Error::Config(e.to_string()))?,
                ((nu - 2.0) / nu).sqrt(),
            )),
            Innovation::StudentT { nu } => Err(Error::Config(format!(
                "student-t innovations need nu > 2 for unit variance, got {nu}"
            ))),
        }
    }
}

enum Sampler {
    Gaussian,
    T(StudentT<f64>, f64),
}

impl Sampler {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Gaussian => StandardNormal.sample(rng),
            Sampler::T(d, scale) => d.sample(rng) * scale,
        }
    }
}

/// A factor loading, either fixed or moving linearly between two times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Loading {
    Constant(f64),
    /// `from` until `start`, linear to `to` at `end`, `to` afterwards.
    /// `start == end` is a single switch.
    Ramp {
        from: f64,
        to: f64,
        start: usize,
        end: usize,
    },
}

impl Default for Loading {
    fn default() -> Self {
        Loading::Constant(0.0)
    }
}

impl Loading {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            Loading::Constant(v) => v,
            Loading::Ramp { from, to, start, end } => {
                if t <= start {
                    if t == start && start == end {
                        to
                    } else {
                        from
                    }
                } else if t >= end {
                    to
                } else {
                    from + (to - from) * (t - start) as f64 / (end - start) as f64
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<usize> {
        match *self {
            Loading::Constant(_) => vec![],
            Loading::Ramp { start, end, .. } => vec![start.saturating_sub(1), start, end],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl Default for GarchParams {
    fn default() -> Self {
        GarchParams {
            alpha0: 1e-5,
            alpha1: 0.1,
            beta1: 0.85,
        }
    }
}

/// A block of assets sharing country, sector, loadings and GARCH parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub country: Country,
    pub sector: Sector,
    pub n_assets: usize,
    #[serde(default)]
    pub global: Loading,
    #[serde(default)]
    pub country_loading: Loading,
    #[serde(default)]
    pub sector_loading: Loading,
    #[serde(default)]
    pub garch: Option<GarchParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Number of returns; the panel has one more price date.
    pub n_obs: usize,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    #[serde(default)]
    pub innovation: Innovation,
    #[serde(default)]
    pub garch: GarchParams,
    pub cells: Vec<CellSpec>,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2006, 7, 3).unwrap()
}

impl SyntheticSpec {
    /// Every (country, sector) combination with `n` assets and constant loadings.
    pub fn grid(countries: &[Country], sectors: &[Sector], n: usize, n_obs: usize, seed: u64) -> SyntheticSpec {
        let cells = countries
            .iter()
            .flat_map(|&country| {
                sectors.iter().map(move |&sector| CellSpec {
                    country,
                    sector,
                    n_assets: n,
                    global: Loading::default(),
                    country_loading: Loading::default(),
                    sector_loading: Loading::default(),
                    garch: None,
                })
            })
            .collect();
        SyntheticSpec {
            seed,
            n_obs,
            start_date: default_start(),
            innovation: Innovation::default(),
            garch: GarchParams::default(),
            cells,
        }
    }

    pub fn n_assets(&self) -> usize {
        self.cells.iter().map(|c| c.n_assets).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_obs == 0 {
            return Err(Error::Config("n_obs must be positive".into()));
        }
        if self.n_assets() == 0 {
            return Err(Error::Config("spec has no assets".into()));
        }
        self.innovation.sampler()?;
        let mut seen = std::collections::BTreeSet::new();
        for cell in &self.cells {
            if !seen.insert((cell.country, cell.sector)) {
                return Err(Error::Config(format!(
                    "duplicate cell {}/{}",
                    cell.country, cell.sector
                )));
            }
        }
        for cell in &self.cells {
            let g = cell.garch.unwrap_or(self.garch);
            if !(g.alpha0 > 0.0 && g.alpha1 >= 0.0 && g.beta1 >= 0.0 && g.alpha1 + g.beta1 < 1.0) {
                return Err(Error::Config(format!(
                    "GARCH parameters for {}/{} violate alpha0 > 0, alpha1, beta1 >= 0, alpha1 + beta1 < 1",
                    cell.country, cell.sector
                )));
            }
            let mut ts = vec![0, self.n_obs - 1];
            for l in [&cell.global, &cell.country_loading, &cell.sector_loading] {
                ts.extend(l.breakpoints());
            }
            for t in ts {
                let t = t.min(self.n_obs - 1);
                let common =
                    cell.global.at(t).powi(2) + cell.country_loading.at(t).powi(2) + cell.sector_loading.at(t).powi(2);
                if common > 1.0 + 1e-12 {
                    return Err(Error::Config(format!(
                        "loadings for {}/{} at t={t} sum to {common:.4} > 1: implied correlation is not positive definite",
                        cell.country, cell.sector
                    )));
                }
            }
        }
        Ok(())
    }

    fn asset_cells(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .flat_map(|(c, cell)| std::iter::repeat_n(c, cell.n_assets))
            .collect()
    }

    /// Correlation of the standardized shocks at time `t`.
    pub fn implied_correlation_at(&self, t: usize) -> Array2<f64> {
        let cells = self.asset_cells();
        let n = cells.len();
        Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                return 1.0;
            }
            let (a, b) = (&self.cells[cells[i]], &self.cells[cells[j]]);
            let mut r = a.global.at(t) * b.global.at(t);
            if a.country == b.country {
                r += a.country_loading.at(t) * b.country_loading.at(t);
            }
            if a.sector == b.sector {
                r += a.sector_loading.at(t) * b.sector_loading.at(t);
            }
            r
        })
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub prices: PricePanel,
    pub meta: Vec<AssetMeta>,
    /// Shock correlation at the first observation.
    pub implied_corr: Array2<f64>,
    /// The generated log returns.
    pub returns: ReturnPanel,
    /// True conditional variances `h_t`, aligned with `returns`.
    pub variances: Array2<f64>,
    /// Standardized shocks `z_t`.
    pub shocks: Array2<f64>,
}

fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if d.weekday().number_from_monday() <= 5 {
            out.push(d);
        }
        d = d.succ_opt().expect("date overflow");
    }
    out
}

/// Draws a panel from `spec`.
pub fn simulate_panel(spec: &SyntheticSpec) -> Result<SyntheticPanel> {
    simulate_panel_with(spec, Execution::Parallel)
}

pub fn simulate_panel_with(spec: &SyntheticSpec, exec: Execution) -> Result<SyntheticPanel> {
    spec.validate()?;
    let sampler = spec.innovation.sampler()?;
    let steps = BURN_IN + spec.n_obs;
    let n_factors = 1 + Country::ALL.len() + Sector::ALL.len();

    let mut frng = ChaCha8Rng::seed_from_u64(spec.seed);
    frng.set_stream(0);
    let factors: Vec<f64> = (0..steps * n_factors).map(|_| sampler.draw(&mut frng)).collect();

    let cells = spec.asset_cells();
    let n = cells.len();
    let per_asset = map_indices(n, exec, |i| {
        let cell = &spec.cells[cells[i]];
        let g = cell.garch.unwrap_or(spec.garch);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1 + i as u64);
        let mut h = g.alpha0 / (1.0 - g.alpha1 - g.beta1);
        let mut r = Vec::with_capacity(spec.n_obs);
        let mut hs = Vec::with_capacity(spec.n_obs);
        let mut zs = Vec::with_capacity(spec.n_obs);
        for step in 0..steps {
            let t = step.saturating_sub(BURN_IN);
            let f = &factors[step * n_factors..(step + 1) * n_factors];
            let (lg, lc, ls) = (cell.global.at(t), cell.country_loading.at(t), cell.sector_loading.at(t));
            let idio = (1.0 - lg * lg - lc * lc - ls * ls).max(0.0).sqrt();
            let z = lg * f[0]
                + lc * f[1 + cell.country.index()]
                + ls * f[1 + Country::ALL.len() + cell.sector.index()]
                + idio * sampler.draw(&mut rng);
            let ret = h.sqrt() * z;
            if step >= BURN_IN {
                r.push(ret);
                hs.push(h);
                zs.push(z);
            }
            h = g.alpha0 + g.alpha1 * ret * ret + g.beta1 * h;
        }
        (r, hs, zs)
    });

    let dates = weekdays(spec.start_date, spec.n_obs + 1);
    let mut meta = Vec::with_capacity(n);
    let mut counters = vec![0usize; spec.cells.len()];
    for &c in &cells {
        let cell = &spec.cells[c];
        counters[c] += 1;
        meta.push(AssetMeta {
            asset_id: format!("{}_{}_{:02}", cell.country, cell.sector.short(), counters[c]),
            country: cell.country,
            sector: cell.sector,
        });
    }
    let assets: Vec<String> = meta.iter().map(|m| m.asset_id.clone()).collect();

    let returns = Array2::from_shape_fn((spec.n_obs, n), |(t, j)| per_asset[j].0[t]);
    let variances = Array2::from_shape_fn((spec.n_obs, n), |(t, j)| per_asset[j].1[t]);
    let shocks = Array2::from_shape_fn((spec.n_obs, n), |(t, j)| per_asset[j].2[t]);
    let mut prices = Array2::zeros((spec.n_obs + 1, n));
    for j in 0..n {
        let mut logp = 100f64.ln();
        prices[[0, j]] = 100.0;
        for t in 0..spec.n_obs {
            logp += returns[[t, j]];
            prices[[t + 1, j]] = logp.exp();
        }
    }
    let volumes = Array2::from_elem((spec.n_obs + 1, n), VOLUME);
    let prices = PricePanel::new(dates.clone(), assets.clone(), prices, volumes)?;

    Ok(SyntheticPanel {
        prices,
        implied_corr: spec.implied_correlation_at(0),
        returns: ReturnPanel {
            dates: dates[1..].to_vec(),
            assets,
            returns,
            frequency: Frequency::Daily,
        },
        variances,
        shocks,
        meta,
    })
}

impl SyntheticPanel {
    /// Writes `prices.csv`-style and `meta.csv`-style files readable by [`crate::market::load_prices`].
    pub fn write(&self, prices_path: &Path, meta_path: &Path) -> Result<()> {
        crate::market::write_prices(prices_path, &self.prices)?;
        crate::market::write_meta(meta_path, &self.meta)
    }
}
