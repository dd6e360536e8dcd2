//! Correction for non-synchronous closing times between markets.
//!
//! Country-block mean p-values from weekly and daily estimates give the ratio
//! `pr = (1 + pw) / (1 + pd)`. The within-country mean of `pr` is mapped to a
//! neutral factor, `pc = min(1, pr - (diag - 1))`, and daily p-values are then
//! corrected as `max(0, (1 + p) pc - 1)`.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::PValueMatrix;
use crate::error::{Error, Result};
use crate::vocab::Country;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionFactors {
    /// Row and column order of every matrix: all countries.
    pub countries: Vec<Country>,
    /// Weekly and daily block means; `NaN` where a block has no pairs.
    pub weekly_mean: Array2<f64>,
    pub daily_mean: Array2<f64>,
    /// Number of daily stock pairs behind each block (ordered pairs).
    pub pair_counts: Array2<usize>,
    pub pr: Array2<f64>,
    /// Pair-weighted mean of `pr` over the within-country blocks.
    pub diag_mean: f64,
    pub pc: Array2<f64>,
}

fn block_means(m: &PValueMatrix) -> (Array2<f64>, Array2<usize>) {
    let k = Country::ALL.len();
    let mut sum = Array2::<f64>::zeros((k, k));
    let mut cnt = Array2::<usize>::zeros((k, k));
    for i in 0..m.len() {
        let a = m.nodes[i].country.index();
        for j in 0..m.len() {
            let v = m.p[[i, j]];
            if i != j && !v.is_nan() {
                let b = m.nodes[j].country.index();
                sum[[a, b]] += v;
                cnt[[a, b]] += 1;
            }
        }
    }
    let mean = Array2::from_shape_fn((k, k), |(a, b)| {
        if cnt[[a, b]] == 0 {
            f64::NAN
        } else {
            sum[[a, b]] / cnt[[a, b]] as f64
        }
    });
    (mean, cnt)
}

/// Country-pair correction factors from weekly and daily p-values of the same assets.
pub fn compute_timing_correction(weekly: &PValueMatrix, daily: &PValueMatrix) -> Result<CorrectionFactors> {
    if weekly.nodes != daily.nodes {
        return Err(Error::Config("weekly and daily p-values cover different assets".into()));
    }
    let (wm, _) = block_means(weekly);
    let (dm, cnt) = block_means(daily);
    let k = Country::ALL.len();
    let pr = Array2::from_shape_fn((k, k), |(a, b)| {
        let (w, d) = (wm[[a, b]], dm[[a, b]]);
        if w.is_nan() || d.is_nan() {
            1.0
        } else {
            (1.0 + w) / (1.0 + d)
        }
    });
    let (mut num, mut den) = (0.0, 0usize);
    for a in 0..k {
        if !wm[[a, a]].is_nan() && !dm[[a, a]].is_nan() {
            num += cnt[[a, a]] as f64 * pr[[a, a]];
            den += cnt[[a, a]];
        }
    }
    let diag_mean = if den == 0 { 1.0 } else { num / den as f64 };
    let pc = Array2::from_shape_fn((k, k), |(a, b)| {
        if wm[[a, b]].is_nan() || dm[[a, b]].is_nan() {
            1.0
        } else {
            (pr[[a, b]] - (diag_mean - 1.0)).min(1.0)
        }
    });
    Ok(CorrectionFactors {
        countries: Country::ALL.to_vec(),
        weekly_mean: wm,
        daily_mean: dm,
        pair_counts: cnt,
        pr,
        diag_mean,
        pc,
    })
}

/// Applies the country-pair factors to daily p-values.
pub fn apply_timing_correction(daily: &PValueMatrix, cf: &CorrectionFactors) -> Result<PValueMatrix> {
    if cf.countries != Country::ALL {
        return Err(Error::Config(
            "correction factors must list every country in order".into(),
        ));
    }
    if cf.pc.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("correction factors contain non-finite values".into()));
    }
    let mut out = daily.clone();
    for i in 0..daily.len() {
        let a = daily.nodes[i].country.index();
        for j in 0..daily.len() {
            let v = daily.p[[i, j]];
            if i != j && !v.is_nan() {
                let c = cf.pc[[a, daily.nodes[j].country.index()]];
                if c != 1.0 {
                    out.p[[i, j]] = ((1.0 + v) * c - 1.0).clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok(out)
}

impl CorrectionFactors {
    /// No-op factors.
    pub fn identity() -> CorrectionFactors {
        let k = Country::ALL.len();
        CorrectionFactors {
            countries: Country::ALL.to_vec(),
            weekly_mean: Array2::from_elem((k, k), f64::NAN),
            daily_mean: Array2::from_elem((k, k), f64::NAN),
            pair_counts: Array2::zeros((k, k)),
            pr: Array2::ones((k, k)),
            diag_mean: 1.0,
            pc: Array2::ones((k, k)),
        }
    }

    pub fn factor(&self, a: Country, b: Country) -> f64 {
        self.pc[[a.index(), b.index()]]
    }

    /// Writes the `pc` matrix keyed by country codes.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "# fig1_correction diag_mean={}", self.diag_mean).map_err(io)?;
        let codes: Vec<&str> = self.countries.iter().map(|c| c.code()).collect();
        writeln!(w, "country,{}", codes.join(",")).map_err(io)?;
        for (a, c) in self.countries.iter().enumerate() {
            let row: Vec<String> = (0..codes.len()).map(|b| self.pc[[a, b]].to_string()).collect();
            writeln!(w, "{},{}", c.code(), row.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads a factor matrix written by [`CorrectionFactors::write_csv`].
    /// Only `pc` and `diag_mean` are stored; the block means come back as `NaN`.
    pub fn read_csv(path: &Path) -> Result<CorrectionFactors> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let perr = |line: usize, message: String| Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut cf = CorrectionFactors::identity();
        cf.pr.fill(f64::NAN);
        let mut header: Option<Vec<Country>> = None;
        let mut seen = 0;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.split_whitespace().find_map(|t| t.strip_prefix("diag_mean=")) {
                    cf.diag_mean = v
                        .parse()
                        .map_err(|_| perr(ln + 1, format!("invalid diag_mean '{v}'")))?;
                }
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            match &header {
                None => {
                    let cols = f[1..]
                        .iter()
                        .map(|s| s.parse::<Country>())
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| perr(ln + 1, e.to_string()))?;
                    header = Some(cols);
                }
                Some(cols) => {
                    let a: Country = f[0].parse().map_err(|e: Error| perr(ln + 1, e.to_string()))?;
                    if f.len() != cols.len() + 1 {
                        return Err(perr(ln + 1, "row length does not match header".into()));
                    }
                    for (b, v) in cols.iter().zip(&f[1..]) {
                        cf.pc[[a.index(), b.index()]] =
                            v.parse().map_err(|_| perr(ln + 1, format!("invalid number '{v}'")))?;
                    }
                    seen += 1;
                }
            }
        }
        if seen == 0 {
            return Err(perr(0, "no factor rows".into()));
        }
        Ok(cf)
    }
}
