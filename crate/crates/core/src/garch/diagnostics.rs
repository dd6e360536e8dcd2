//! Residual diagnostics: autocorrelation of absolute values and t tail fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tfit::{self, Design};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acf {
    /// Autocorrelations for lags `1..=max_lag`.
    pub values: Vec<f64>,
    /// Half-width of the white-noise band, `2 / sqrt(T)`.
    pub band: f64,
    pub n_obs: usize,
}

impl Acf {
    pub fn fraction_inside(&self) -> f64 {
        if self.values.is_empty() {
            return 1.0;
        }
        let inside = self.values.iter().filter(|v| v.abs() <= self.band).count();
        inside as f64 / self.values.len() as f64
    }
}

/// Sample autocorrelation of `|x|`; missing values are dropped before lagging.
pub fn acf_diagnostic(series: &[f64], max_lag: usize) -> Result<Acf> {
    let a: Vec<f64> = series.iter().filter(|x| !x.is_nan()).map(|x| x.abs()).collect();
    let n = a.len();
    if n <= max_lag + 1 {
        return Err(Error::InsufficientData(format!(
            "ACF to lag {max_lag} needs more than {} observations, got {n}",
            max_lag + 1
        )));
    }
    let m = a.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = a.iter().map(|x| x - m).collect();
    let c0: f64 = d.iter().map(|x| x * x).sum();
    let values = (1..=max_lag)
        .map(|k| {
            if c0 == 0.0 {
                0.0
            } else {
                d[k..].iter().zip(&d[..n - k]).map(|(x, y)| x * y).sum::<f64>() / c0
            }
        })
        .collect();
    Ok(Acf {
        values,
        band: 2.0 / (n as f64).sqrt(),
        n_obs: n,
    })
}

/// Lag-wise mean of the `|x|` autocorrelations over several series.
pub fn mean_abs_acf(series: &[Vec<f64>], max_lag: usize) -> Result<Acf> {
    if series.is_empty() {
        return Err(Error::InsufficientData("no series".into()));
    }
    let acfs = series
        .iter()
        .map(|s| acf_diagnostic(s, max_lag))
        .collect::<Result<Vec<_>>>()?;
    let values = (0..max_lag)
        .map(|k| acfs.iter().map(|a| a.values[k]).sum::<f64>() / acfs.len() as f64)
        .collect();
    let n_obs = acfs.iter().map(|a| a.n_obs).min().unwrap();
    Ok(Acf {
        values,
        band: 2.0 / (n_obs as f64).sqrt(),
        n_obs,
    })
}

fn df_grid() -> Vec<f64> {
    let mut g = vec![2.1, 2.5];
    g.extend((3..=50).map(f64::from));
    g
}

/// ML degrees of freedom of a location-scale t law, searched over `[2.1, 50]`.
pub fn fit_t_df(sample: &[f64]) -> Result<f64> {
    let xs: Vec<f64> = sample.iter().copied().filter(|x| !x.is_nan()).collect();
    if xs.len() < 500 {
        return Err(Error::InsufficientData(format!(
            "t fit needs 500 observations, got {}",
            xs.len()
        )));
    }
    Ok(tfit::fit(Design::Intercept, &xs, &df_grid())?.nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, StudentT};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn white_noise_mostly_inside_band() {
        // Pooled over many draws so the check is about the sampling law, not one seed.
        let mut inside = 0;
        let mut total = 0;
        for s in 0..40 {
            let acf = acf_diagnostic(&normals(s, 1329), 50).unwrap();
            inside += acf.values.iter().filter(|v| v.abs() <= acf.band).count();
            total += acf.values.len();
        }
        assert!(inside as f64 / total as f64 >= 0.95);
        let acf = acf_diagnostic(&normals(99, 1329), 50).unwrap();
        assert!(acf.fraction_inside() >= 0.9);
    }

    #[test]
    fn clustered_volatility_shows_up() {
        use crate::synthetic::{simulate_panel, SyntheticSpec};
        use crate::vocab::{Country, Sector};
        let spec = SyntheticSpec::grid(&[Country::Usa], &[Sector::Energy], 1, 2000, 3);
        let p = simulate_panel(&spec).unwrap();
        let raw = acf_diagnostic(&p.returns.series(0), 50).unwrap();
        assert!(raw.values[0] > raw.band);
        let f = crate::garch::filter_with_variance(&p.returns.series(0), &p.variances.column(0).to_vec()).unwrap();
        assert!(acf_diagnostic(&f, 50).unwrap().fraction_inside() >= 0.9);
    }

    #[test]
    fn band_and_precondition() {
        let acf = acf_diagnostic(&normals(1, 400), 10).unwrap();
        assert_eq!(acf.values.len(), 10);
        assert!((acf.band - 0.1).abs() < 1e-15);
        assert!(acf_diagnostic(&[1.0; 11], 10).is_err());
        assert_eq!(acf_diagnostic(&[1.0; 12], 10).unwrap().values, vec![0.0; 10]);
    }

    #[test]
    fn recovers_t5_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = StudentT::new(5.0).unwrap();
        let xs: Vec<f64> = (0..20_000).map(|_| 0.02 * t.sample(&mut rng) + 0.001).collect();
        let nu = fit_t_df(&xs).unwrap();
        assert!((4.3..=5.9).contains(&nu), "nu = {nu}");
        let mirrored: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((fit_t_df(&mirrored).unwrap() - nu).abs() < 1e-6);
    }

    #[test]
    fn gaussian_sits_in_upper_region() {
        let nu = fit_t_df(&normals(8, 20_000)).unwrap();
        assert!(nu >= 30.0, "nu = {nu}");
    }

    #[test]
    fn rejects_small_or_degenerate() {
        assert!(matches!(fit_t_df(&normals(1, 100)), Err(Error::InsufficientData(_))));
        assert!(fit_t_df(&[0.5; 600]).is_err());
    }
}
