//! Correlation of conditional variances next to correlation of filtered returns.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, upper_pairs, Execution};
use crate::stats::pearson;
use crate::vocab::Country;

/// Country-pair mean correlations; `NaN` where a block has no stock pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatilityCorrelation {
    pub countries: Vec<Country>,
    pub volatility: Array2<f64>,
    pub returns: Array2<f64>,
    pub pair_counts: Array2<usize>,
}

impl VolatilityCorrelation {
    /// `(a, b, volatility, returns)` for every populated block with `a <= b`.
    pub fn points(&self) -> Vec<(Country, Country, f64, f64)> {
        let k = self.countries.len();
        let mut out = Vec::new();
        for a in 0..k {
            for b in a..k {
                if self.pair_counts[[a, b]] > 0 {
                    out.push((
                        self.countries[a],
                        self.countries[b],
                        self.volatility[[a, b]],
                        self.returns[[a, b]],
                    ));
                }
            }
        }
        out
    }
}

/// Averages stock-pair Pearson correlations of `variances` and of `filtered`
/// (both dates x assets) over each country pair.
pub fn volatility_correlation(
    variances: &Array2<f64>,
    filtered: &Array2<f64>,
    countries: &[Country],
    exec: Execution,
) -> Result<VolatilityCorrelation> {
    let n = countries.len();
    if variances.dim() != filtered.dim() || variances.ncols() != n {
        return Err(Error::Config(format!(
            "shape mismatch: variances {:?}, filtered {:?}, {n} countries",
            variances.dim(),
            filtered.dim()
        )));
    }
    let h: Vec<Vec<f64>> = (0..n).map(|j| variances.column(j).to_vec()).collect();
    let r: Vec<Vec<f64>> = (0..n).map(|j| filtered.column(j).to_vec()).collect();
    let pairs = upper_pairs(n);
    let corr = map_indices(pairs.len(), exec, |k| {
        let (i, j) = pairs[k];
        (pearson(&h[i], &h[j]), pearson(&r[i], &r[j]))
    });

    let k = Country::ALL.len();
    let mut vs = Array2::<f64>::zeros((k, k));
    let mut rs = Array2::<f64>::zeros((k, k));
    let mut cnt = Array2::<usize>::zeros((k, k));
    for (&(i, j), (v, c)) in pairs.iter().zip(corr) {
        if v.is_nan() || c.is_nan() {
            continue;
        }
        let (a, b) = (countries[i].index(), countries[j].index());
        for (x, y) in [(a, b), (b, a)] {
            vs[[x, y]] += v;
            rs[[x, y]] += c;
            cnt[[x, y]] += 1;
        }
        if a == b {
            // Both orientations landed on the same cell.
            vs[[a, a]] -= v;
            rs[[a, a]] -= c;
            cnt[[a, a]] -= 1;
        }
    }
    let avg = |s: &Array2<f64>| {
        Array2::from_shape_fn(
            (k, k),
            |ix| if cnt[ix] == 0 { f64::NAN } else { s[ix] / cnt[ix] as f64 },
        )
    };
    Ok(VolatilityCorrelation {
        countries: Country::ALL.to_vec(),
        volatility: avg(&vs),
        returns: avg(&rs),
        pair_counts: cnt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{simulate_panel, SyntheticSpec};
    use crate::vocab::Sector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn shared_variance_independent_shocks() {
        let spec = SyntheticSpec::grid(&[Country::Usa], &[Sector::Energy], 1, 2000, 11);
        let p = simulate_panel(&spec).unwrap();
        let h = p.variances.column(0).to_owned();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let var = Array2::from_shape_fn((2000, 2), |(t, _)| h[t]);
        let ret = Array2::from_shape_fn((2000, 2), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let vc = volatility_correlation(&var, &ret, &[Country::Usa, Country::Gbr], Execution::Sequential).unwrap();
        let (u, g) = (Country::Usa.index(), Country::Gbr.index());
        assert!((vc.volatility[[u, g]] - 1.0).abs() < 1e-12);
        assert!(vc.returns[[u, g]].abs() < 0.05);
        assert_eq!(vc.volatility[[u, g]], vc.volatility[[g, u]]);
        assert_eq!(vc.points().len(), 1);
    }

    #[test]
    fn identical_assets_give_unit_correlations() {
        let spec = SyntheticSpec::grid(&[Country::Usa], &[Sector::Energy], 1, 500, 12);
        let p = simulate_panel(&spec).unwrap();
        let var = Array2::from_shape_fn((500, 2), |(t, _)| p.variances[[t, 0]]);
        let ret = Array2::from_shape_fn((500, 2), |(t, _)| p.returns.returns[[t, 0]]);
        let vc = volatility_correlation(&var, &ret, &[Country::Usa; 2], Execution::Sequential).unwrap();
        let u = Country::Usa.index();
        assert!((vc.volatility[[u, u]] - 1.0).abs() < 1e-12);
        assert!((vc.returns[[u, u]] - 1.0).abs() < 1e-12);
        assert_eq!(vc.pair_counts[[u, u]], 1);
    }

    #[test]
    fn independent_assets_average_near_zero() {
        let mut spec = SyntheticSpec::grid(&[Country::Usa, Country::Gbr], &[Sector::Energy], 4, 2000, 13);
        spec.innovation = crate::synthetic::Innovation::Gaussian;
        let p = simulate_panel(&spec).unwrap();
        let countries: Vec<Country> = p.meta.iter().map(|m| m.country).collect();
        let filt = Array2::from_shape_fn(p.returns.returns.dim(), |ix| {
            p.returns.returns[ix] / p.variances[ix].sqrt()
        });
        let vc = volatility_correlation(&p.variances, &filt, &countries, Execution::Parallel).unwrap();
        for (_, _, v, r) in vc.points() {
            assert!(v.abs() < 0.05, "volatility {v}");
            assert!(r.abs() < 0.05, "returns {r}");
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Array2::zeros((10, 2));
        let b = Array2::zeros((10, 3));
        assert!(volatility_correlation(&a, &b, &[Country::Usa; 2], Execution::Sequential).is_err());
    }
}
