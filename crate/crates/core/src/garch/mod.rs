//! GARCH(1,1) filtering.
//!
//! `h_t = alpha0 + alpha1 r_{t-1}^2 + beta1 h_{t-1}` is fitted by Gaussian
//! quasi-maximum likelihood and returns are rescaled to unit volatility,
//! `r_t / sqrt(h_t)`. The recursion starts from `h_0` equal to the mean square
//! of the series. A missing `r_{t-1}` contributes its expectation `h_{t-1}` to
//! the recursion and nothing to the likelihood.

mod diagnostics;
mod optim;

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::market::{Frequency, ReturnPanel};

pub use diagnostics::{acf_diagnostic, fit_t_df, mean_abs_acf, Acf};
pub use optim::{minimize, BfgsOptions, BfgsResult};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GarchConfig {
    /// Convergence threshold on the gradient norm of the mean negative log-likelihood.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Upper bound on `alpha1 + beta1`.
    pub persistence_max: f64,
    pub min_obs: usize,
}

impl Default for GarchConfig {
    fn default() -> Self {
        GarchConfig {
            grad_tol: 1e-8,
            max_iter: 500,
            persistence_max: 0.9999,
            min_obs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    /// Conditional variance, aligned with the input series.
    pub h: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Mean of the squared present values, the starting variance of the recursion.
pub fn initial_variance(series: &[f64]) -> f64 {
    let (s, n) = series
        .iter()
        .filter(|x| !x.is_nan())
        .fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs the variance recursion from `h0`.
pub fn conditional_variance(series: &[f64], alpha0: f64, alpha1: f64, beta1: f64, h0: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(series.len());
    let mut prev = h0;
    for t in 0..series.len() {
        if t > 0 {
            let r_prev = series[t - 1];
            let e2 = if r_prev.is_nan() { h[t - 1] } else { r_prev * r_prev };
            prev = alpha0 + alpha1 * e2 + beta1 * h[t - 1];
        }
        h.push(prev);
    }
    h
}

/// Gaussian log-likelihood of the present observations given `h`.
pub fn gaussian_loglik(series: &[f64], h: &[f64]) -> f64 {
    series
        .iter()
        .zip(h)
        .filter(|(r, _)| !r.is_nan())
        .map(|(r, h)| -0.5 * (LN_2PI + h.ln() + r * r / h))
        .sum()
}

/// Log-likelihood and its gradient in `(alpha0, alpha1, beta1)`.
fn loglik_grad(series: &[f64], a0: f64, a1: f64, b1: f64, h0: f64) -> (f64, [f64; 3]) {
    let mut ll = 0.0;
    let mut grad = [0.0; 3];
    let mut h = h0;
    let mut dh = [0.0; 3];
    for t in 0..series.len() {
        if t > 0 {
            let r_prev = series[t - 1];
            let (e2, de2) = if r_prev.is_nan() {
                (h, dh)
            } else {
                (r_prev * r_prev, [0.0; 3])
            };
            let new_h = a0 + a1 * e2 + b1 * h;
            let new_dh = [
                1.0 + a1 * de2[0] + b1 * dh[0],
                e2 + a1 * de2[1] + b1 * dh[1],
                h + a1 * de2[2] + b1 * dh[2],
            ];
            h = new_h;
            dh = new_dh;
        }
        let r = series[t];
        if r.is_nan() {
            continue;
        }
        ll += -0.5 * (LN_2PI + h.ln() + r * r / h);
        let c = -0.5 * (1.0 / h - r * r / (h * h));
        for k in 0..3 {
            grad[k] += c * dh[k];
        }
    }
    (ll, grad)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates: `alpha0 = v exp(u0)`, `alpha1 + beta1 = pmax logistic(u1)`,
/// `alpha1 = (alpha1 + beta1) logistic(u2)`, with `v` the starting variance.
struct Reparam {
    v: f64,
    pmax: f64,
}

impl Reparam {
    fn params(&self, u: &[f64]) -> (f64, f64, f64) {
        let a0 = self.v * u[0].exp();
        let p = self.pmax * logistic(u[1]);
        let s = logistic(u[2]);
        (a0, p * s, p * (1.0 - s))
    }

    fn coords(&self, a0: f64, a1: f64, b1: f64) -> [f64; 3] {
        let p = a1 + b1;
        [(a0 / self.v).ln(), logit(p / self.pmax), logit(a1 / p)]
    }

    /// Chain rule from a gradient in `(alpha0, alpha1, beta1)` to `u`.
    fn pull_back(&self, u: &[f64], g: [f64; 3]) -> Vec<f64> {
        let (a0, _, _) = self.params(u);
        let l1 = logistic(u[1]);
        let s = logistic(u[2]);
        let p = self.pmax * l1;
        let dp = self.pmax * l1 * (1.0 - l1);
        let ds = s * (1.0 - s);
        vec![g[0] * a0, g[1] * s * dp + g[2] * (1.0 - s) * dp, (g[1] - g[2]) * p * ds]
    }
}

/// Quasi-ML GARCH(1,1) fit.
///
/// Several starting points are optimized and the highest likelihood wins. A
/// fit that does not reach the gradient tolerance is still returned with
/// `converged = false`.
pub fn fit_garch11(series: &[f64], cfg: &GarchConfig) -> Result<GarchFit> {
    let present: Vec<f64> = series.iter().copied().filter(|x| !x.is_nan()).collect();
    if present.len() < cfg.min_obs {
        return Err(Error::InsufficientData(format!(
            "GARCH fit needs {} observations, got {}",
            cfg.min_obs,
            present.len()
        )));
    }
    if present.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("series contains infinite values".into()));
    }
    if present.iter().all(|&x| x == present[0]) {
        return Err(Error::Estimation("constant series".into()));
    }
    let v = initial_variance(series);
    let n = present.len() as f64;
    let rp = Reparam {
        v,
        pmax: cfg.persistence_max,
    };
    let objective = |u: &[f64]| {
        let (a0, a1, b1) = rp.params(u);
        let (ll, g) = loglik_grad(series, a0, a1, b1, v);
        let gu = rp.pull_back(u, g);
        (-ll / n, gu.into_iter().map(|x| -x / n).collect::<Vec<_>>())
    };
    let opts = BfgsOptions {
        grad_tol: cfg.grad_tol,
        max_iter: cfg.max_iter,
    };
    let starts = [(0.05, 0.90), (0.10, 0.80), (0.03, 0.30)];
    let best = starts
        .iter()
        .map(|&(a1, b1)| {
            let u0 = rp.coords(v * (1.0 - a1 - b1), a1, b1);
            minimize(objective, &u0, opts)
        })
        .filter(|r| r.f.is_finite())
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .ok_or_else(|| Error::Estimation("likelihood not finite at any start".into()))?;

    let (alpha0, alpha1, beta1) = rp.params(&best.x);
    let h = conditional_variance(series, alpha0, alpha1, beta1, v);
    if h.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::Estimation("non-positive conditional variance".into()));
    }
    Ok(GarchFit {
        alpha0,
        alpha1,
        beta1,
        loglik: gaussian_loglik(series, &h),
        h,
        converged: best.converged,
        iterations: best.iterations,
        grad_norm: best.grad_norm,
    })
}

/// `r_t / sqrt(h_t)`; missing inputs stay missing.
pub fn filter_returns(series: &[f64], fit: &GarchFit) -> Result<Vec<f64>> {
    filter_with_variance(series, &fit.h)
}

pub fn filter_with_variance(series: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != series.len() {
        return Err(Error::Config(format!(
            "variance series has length {}, returns have {}",
            h.len(),
            series.len()
        )));
    }
    series
        .iter()
        .zip(h)
        .map(|(&r, &v)| {
            if !(v > 0.0) {
                Err(Error::Domain(format!("conditional variance {v} is not positive")))
            } else {
                Ok(r / v.sqrt())
            }
        })
        .collect()
}

/// Unit-volatility returns for the assets whose fit converged.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredPanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub filtered: Array2<f64>,
    pub frequency: Frequency,
}

impl FilteredPanel {
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn series(&self, a: usize) -> Vec<f64> {
        self.filtered.column(a).to_vec()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        ReturnPanel {
            dates: self.dates.clone(),
            assets: self.assets.clone(),
            returns: self.filtered.clone(),
            frequency: self.frequency,
        }
        .write_csv(path)
    }

    pub fn read_csv(path: &Path, frequency: Frequency) -> Result<FilteredPanel> {
        let p = ReturnPanel::read_csv(path, frequency)?;
        Ok(FilteredPanel {
            dates: p.dates,
            assets: p.assets,
            filtered: p.returns,
            frequency,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedAsset {
    pub asset_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct PanelFit {
    /// One entry per input asset; `None` when estimation failed outright.
    pub fits: Vec<Option<GarchFit>>,
    pub assets: Vec<String>,
    pub filtered: FilteredPanel,
    pub excluded: Vec<ExcludedAsset>,
}

/// Fits every asset; non-converged and failed fits are excluded from the filtered panel.
pub fn fit_panel(panel: &ReturnPanel, cfg: &GarchConfig, exec: Execution) -> PanelFit {
    let results = map_indices(panel.n_assets(), exec, |j| fit_garch11(&panel.series(j), cfg));
    let mut fits = Vec::with_capacity(results.len());
    let mut keep = Vec::new();
    let mut excluded = Vec::new();
    for (j, res) in results.into_iter().enumerate() {
        match res {
            Ok(fit) => {
                if fit.converged {
                    keep.push(j);
                } else {
                    log::warn!(
                        "GARCH fit for {} did not converge (gradient norm {:.3e} after {} iterations)",
                        panel.assets[j],
                        fit.grad_norm,
                        fit.iterations
                    );
                    excluded.push(ExcludedAsset {
                        asset_id: panel.assets[j].clone(),
                        reason: format!("not converged after {} iterations", fit.iterations),
                    });
                }
                fits.push(Some(fit));
            }
            Err(e) => {
                log::warn!("GARCH fit for {} failed: {e}", panel.assets[j]);
                excluded.push(ExcludedAsset {
                    asset_id: panel.assets[j].clone(),
                    reason: e.to_string(),
                });
                fits.push(None);
            }
        }
    }
    let filtered = Array2::from_shape_fn((panel.n_obs(), keep.len()), |(t, k)| {
        let j = keep[k];
        let h = fits[j].as_ref().unwrap().h[t];
        panel.returns[[t, j]] / h.sqrt()
    });
    PanelFit {
        filtered: FilteredPanel {
            dates: panel.dates.clone(),
            assets: keep.iter().map(|&j| panel.assets[j].clone()).collect(),
            filtered,
            frequency: panel.frequency,
        },
        assets: panel.assets.clone(),
        fits,
        excluded,
    }
}

impl PanelFit {
    /// `asset_id,alpha0,alpha1,beta1,loglik,converged,iterations`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "asset_id,alpha0,alpha1,beta1,loglik,converged,iterations").map_err(io)?;
        for (a, fit) in self.assets.iter().zip(&self.fits) {
            match fit {
                Some(f) => writeln!(
                    w,
                    "{a},{},{},{},{},{},{}",
                    f.alpha0, f.alpha1, f.beta1, f.loglik, f.converged, f.iterations
                ),
                None => writeln!(w, "{a},,,,,false,0"),
            }
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Conditional variances of the converged assets, aligned with `filtered`.
    pub fn variances(&self) -> Array2<f64> {
        let idx: Vec<usize> = self
            .filtered
            .assets
            .iter()
            .map(|a| self.assets.iter().position(|b| b == a).unwrap())
            .collect();
        Array2::from_shape_fn((self.filtered.dates.len(), idx.len()), |(t, k)| {
            self.fits[idx[k]].as_ref().unwrap().h[t]
        })
    }
}
