//! Maximum likelihood for linear models with Student-t errors.
//!
//! For a fixed degrees of freedom `nu` the coefficients and scale are found by
//! ECM (iteratively reweighted least squares with weights
//! `(nu + 1) / (nu + u^2)`). `nu` itself is profiled: the log-likelihood is
//! evaluated on a grid, then refined by golden-section search around the best
//! grid point.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const EM_TOL: f64 = 1e-10;
const EM_MAX_ITER: usize = 1000;
const GOLDEN_TOL: f64 = 1e-4;

/// Design with an intercept and at most one regressor.
#[derive(Debug, Clone, Copy)]
pub enum Design<'a> {
    Intercept,
    Slope(&'a [f64]),
}

impl Design<'_> {
    fn dim(&self) -> usize {
        match self {
            Design::Intercept => 1,
            Design::Slope(_) => 2,
        }
    }

    fn fitted(&self, coef: &[f64], i: usize) -> f64 {
        match self {
            Design::Intercept => coef[0],
            Design::Slope(x) => coef[0] + coef[1] * x[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TFit {
    /// `[intercept]` or `[intercept, slope]`.
    pub coef: Vec<f64>,
    pub scale: f64,
    pub nu: f64,
    pub loglik: f64,
    /// Standard errors of `coef` from the observed information at fixed `nu`.
    pub se: Vec<f64>,
    /// Set when the observed information was not positive definite and the
    /// expected information was used instead.
    pub expected_info: bool,
}

/// Log-likelihood of residuals under a scaled t law.
pub fn t_loglik(resid: impl Iterator<Item = f64>, scale: f64, nu: f64) -> f64 {
    let c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln() - scale.ln();
    resid
        .map(|r| {
            let u = r / scale;
            c - 0.5 * (nu + 1.0) * (u * u / nu).ln_1p()
        })
        .sum()
}

/// Weighted least squares for a 1- or 2-column design.
fn wls(design: Design, y: &[f64], w: &[f64]) -> Option<Vec<f64>> {
    match design {
        Design::Intercept => {
            let sw: f64 = w.iter().sum();
            (sw > 0.0).then(|| vec![w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sw])
        }
        Design::Slope(x) => {
            let (mut s0, mut s1, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..y.len() {
                s0 += w[i];
                s1 += w[i] * x[i];
                s11 += w[i] * x[i] * x[i];
                t0 += w[i] * y[i];
                t1 += w[i] * x[i] * y[i];
            }
            // centre for stability
            let xm = s1 / s0;
            let sxx = s11 - s1 * xm;
            if !(sxx > 1e-12 * s11) {
                return None;
            }
            let ym = t0 / s0;
            let b1 = (t1 - s1 * ym) / sxx;
            Some(vec![ym - b1 * xm, b1])
        }
    }
}

struct EmState {
    coef: Vec<f64>,
    scale: f64,
}

fn em_fixed_nu(design: Design, y: &[f64], nu: f64, init: &EmState) -> Option<(EmState, f64)> {
    let n = y.len();
    let mut coef = init.coef.clone();
    let mut scale = init.scale;
    let mut w = vec![1.0; n];
    for _ in 0..EM_MAX_ITER {
        for i in 0..n {
            let u = (y[i] - design.fitted(&coef, i)) / scale;
            w[i] = (nu + 1.0) / (nu + u * u);
        }
        let new_coef = wls(design, y, &w)?;
        let ss: f64 = (0..n)
            .map(|i| {
                let r = y[i] - design.fitted(&new_coef, i);
                w[i] * r * r
            })
            .sum();
        let new_scale = (ss / n as f64).sqrt();
        if !(new_scale > 0.0) || !new_scale.is_finite() {
            return None;
        }
        let dcoef = coef
            .iter()
            .zip(&new_coef)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let dscale = (new_scale - scale).abs();
        coef = new_coef;
        scale = new_scale;
        if dcoef <= EM_TOL * scale && dscale <= EM_TOL * scale {
            break;
        }
    }
    let ll = t_loglik((0..n).map(|i| y[i] - design.fitted(&coef, i)), scale, nu);
    Some((EmState { coef, scale }, ll))
}

fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv * (b - a);
    let mut d = a + inv * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > GOLDEN_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky; `None` if not PD.
fn spd_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        // solve L z = e_col, then L' x = z
        let mut z = vec![0.0; n];
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * z[k];
            }
            z[i] = s / l[i][i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= l[k][i] * inv[k][col];
            }
            inv[i][col] = s / l[i][i];
        }
    }
    Some(inv)
}

fn regressors(design: Design, i: usize) -> [f64; 2] {
    match design {
        Design::Intercept => [1.0, 0.0],
        Design::Slope(x) => [1.0, x[i]],
    }
}

/// Standard errors from the observed information in `(coef, ln scale)` at fixed `nu`.
fn standard_errors(design: Design, y: &[f64], st: &EmState, nu: f64) -> (Vec<f64>, bool) {
    let p = design.dim();
    let dim = p + 1;
    let s2 = st.scale * st.scale;
    let mut info = vec![vec![0.0; dim]; dim];
    let mut expected = vec![vec![0.0; dim]; dim];
    let n = y.len() as f64;
    for i in 0..y.len() {
        let x = regressors(design, i);
        let r = y[i] - design.fitted(&st.coef, i);
        let u2 = r * r / s2;
        let den = (nu + u2) * (nu + u2);
        let hbb = (nu + 1.0) * (nu - u2) / (s2 * den);
        let hbs = 2.0 * nu * (nu + 1.0) * r / (s2 * den);
        let hss = 2.0 * nu * (nu + 1.0) * u2 / den;
        for a in 0..p {
            for b in 0..p {
                info[a][b] += hbb * x[a] * x[b];
                expected[a][b] += (nu + 1.0) / ((nu + 3.0) * s2) * x[a] * x[b];
            }
            info[a][p] += hbs * x[a];
            info[p][a] += hbs * x[a];
        }
        info[p][p] += hss;
    }
    expected[p][p] = 2.0 * nu / (nu + 3.0) * n;
    let se = |m: &Vec<Vec<f64>>| (0..p).map(|a| m[a][a].max(0.0).sqrt()).collect::<Vec<_>>();
    match spd_inverse(&info) {
        Some(inv) => (se(&inv), false),
        None => match spd_inverse(&expected) {
            Some(inv) => (se(&inv), true),
            None => (vec![f64::NAN; p], true),
        },
    }
}

/// Profile ML fit of `y = X b + scale * t_nu` with `nu` searched over `grid`
/// and refined by golden section inside `[grid[best-1], grid[best+1]]`.
pub fn fit(design: Design, y: &[f64], grid: &[f64]) -> Result<TFit> {
    let n = y.len();
    if n < design.dim() + 2 {
        return Err(Error::InsufficientData(format!("{n} observations")));
    }
    if let Design::Slope(x) = design {
        if x.len() != n {
            return Err(Error::Estimation("regressor and response lengths differ".into()));
        }
    }
    if grid.is_empty() {
        return Err(Error::Config("empty degrees-of-freedom grid".into()));
    }
    let ones = vec![1.0; n];
    let ols =
        wls(design, y, &ones).ok_or_else(|| Error::Estimation("singular design: regressor is constant".into()))?;
    let rss: f64 = (0..n).map(|i| (y[i] - design.fitted(&ols, i)).powi(2)).sum();
    let ym = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    if tss <= 0.0 {
        return Err(Error::Estimation("response is constant".into()));
    }
    if rss <= 1e-24 * tss {
        return Err(Error::Estimation("exact linear relation".into()));
    }
    let init = EmState {
        coef: ols,
        scale: (rss / n as f64).sqrt(),
    };

    let mut states = Vec::with_capacity(grid.len());
    let mut warm = EmState {
        coef: init.coef.clone(),
        scale: init.scale,
    };
    for &nu in grid {
        let (st, ll) =
            em_fixed_nu(design, y, nu, &warm).ok_or_else(|| Error::Estimation(format!("EM failed at nu = {nu}")))?;
        warm = EmState {
            coef: st.coef.clone(),
            scale: st.scale,
        };
        states.push((nu, st, ll));
    }
    let best = (0..states.len())
        .max_by(|&a, &b| states[a].2.total_cmp(&states[b].2))
        .unwrap();
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (mut nu, mut st, mut ll) = {
        let (nu, st, ll) = &states[best];
        (
            *nu,
            EmState {
                coef: st.coef.clone(),
                scale: st.scale,
            },
            *ll,
        )
    };
    if hi > lo {
        let start = EmState {
            coef: st.coef.clone(),
            scale: st.scale,
        };
        let (nu_star, ll_star) = golden_max(
            |v| em_fixed_nu(design, y, v, &start).map_or(f64::NEG_INFINITY, |(_, ll)| ll),
            lo,
            hi,
        );
        if ll_star > ll {
            if let Some((s2, l2)) = em_fixed_nu(design, y, nu_star, &start) {
                nu = nu_star;
                st = s2;
                ll = l2;
            }
        }
    }
    let (se, expected_info) = standard_errors(design, y, &st, nu);
    Ok(TFit {
        coef: st.coef,
        scale: st.scale,
        nu,
        loglik: ll,
        se,
        expected_info,
    })
}
