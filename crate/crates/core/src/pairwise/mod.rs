//! Pairwise dependence between filtered returns.
//!
//! Each ordered pair is fitted as `y = b0 + b1 x` with Student-t errors and the
//! slope is tested with a Wald statistic. The two directions of a pair are
//! averaged into one symmetric p-value.

mod correction;
mod volatility;

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, upper_pairs, Execution};
use crate::garch::FilteredPanel;
use crate::market::{align_meta, AssetMeta, Frequency};
use crate::stats::{complete_pairs, two_sided_normal_p};
use crate::tfit::{self, Design};
use crate::vocab::{Country, Sector};

pub use correction::{apply_timing_correction, compute_timing_correction, CorrectionFactors};
pub use volatility::{volatility_correlation, VolatilityCorrelation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairConfig {
    /// Minimum number of pairwise-complete observations.
    pub min_obs: usize,
    /// Degrees-of-freedom grid for the error law.
    pub nu_grid: Vec<f64>,
    /// Largest tolerated fraction of skipped pairs before the sweep fails.
    pub max_skip_fraction: f64,
}

impl Default for PairConfig {
    fn default() -> Self {
        PairConfig {
            min_obs: 50,
            nu_grid: (3..=30).map(f64::from).collect(),
            max_skip_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub beta0: f64,
    pub beta1: f64,
    pub se_beta1: f64,
    pub pvalue: f64,
    pub nu: f64,
    pub n_obs: usize,
}

impl PairEstimate {
    pub fn sign(&self) -> i8 {
        if self.beta1 > 0.0 {
            1
        } else if self.beta1 < 0.0 {
            -1
        } else {
            0
        }
    }
}

/// Robust regression of `y` on `x`.
///
/// Fails with [`Error::InsufficientData`] when fewer than `min_obs` dates have
/// both values, which callers treat as a skipped pair. An exact linear
/// relation is reported as `pvalue = 0` with the smallest positive standard error.
pub fn estimate_pair(x: &[f64], y: &[f64], cfg: &PairConfig) -> Result<PairEstimate> {
    if x.len() != y.len() {
        return Err(Error::Config(format!(
            "series lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let (xs, ys) = complete_pairs(x, y);
    let n = xs.len();
    if n < cfg.min_obs.max(4) {
        return Err(Error::InsufficientData(format!(
            "{n} overlapping observations, need {}",
            cfg.min_obs
        )));
    }
    if let Some((b0, b1)) = exact_line(&xs, &ys)? {
        return Ok(PairEstimate {
            beta0: b0,
            beta1: b1,
            se_beta1: f64::MIN_POSITIVE,
            pvalue: 0.0,
            nu: f64::INFINITY,
            n_obs: n,
        });
    }
    let fit = tfit::fit(Design::Slope(&xs), &ys, &cfg.nu_grid)?;
    let se = fit.se[1];
    if !(se.is_finite() && se > 0.0) {
        return Err(Error::Estimation("slope information is not positive".into()));
    }
    Ok(PairEstimate {
        beta0: fit.coef[0],
        beta1: fit.coef[1],
        se_beta1: se,
        pvalue: two_sided_normal_p(fit.coef[1] / se),
        nu: fit.nu,
        n_obs: n,
    })
}

/// Least-squares line when it fits without residual; also rejects constant inputs.
fn exact_line(x: &[f64], y: &[f64]) -> Result<Option<(f64, f64)>> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 {
        return Err(Error::Estimation("singular design: regressor is constant".into()));
    }
    if syy <= 0.0 {
        return Err(Error::Estimation("response is constant".into()));
    }
    let b1 = sxy / sxx;
    let rss = (syy - b1 * sxy).max(0.0);
    Ok((rss <= 1e-24 * syy).then_some((my - b1 * mx, b1)))
}

/// Resolution of a p-value matrix or network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Stock,
    Sector,
    Country,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Stock => "stock",
            Level::Sector => "sector",
            Level::Country => "country",
        }
    }

    fn parse(s: &str) -> Option<Level> {
        [Level::Stock, Level::Sector, Level::Country]
            .into_iter()
            .find(|l| l.as_str() == s)
    }
}

/// A row of a p-value matrix: a stock, a country-sector group or a country.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub label: String,
    pub country: Country,
    pub sector: Option<Sector>,
}

impl Node {
    pub fn from_meta(m: &AssetMeta) -> Node {
        Node {
            label: m.asset_id.clone(),
            country: m.country,
            sector: Some(m.sector),
        }
    }
}

/// Symmetric p-values with slope signs. Diagonal and skipped pairs are `NaN`.
///
/// `sign` is `+1`/`-1` when both directions agree and `0` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueMatrix {
    pub nodes: Vec<Node>,
    pub p: Array2<f64>,
    pub sign: Array2<i8>,
    pub frequency: Frequency,
    pub level: Level,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub pairs: usize,
    pub skipped: usize,
    /// Pairs whose two directions disagree on the slope sign.
    pub sign_conflicts: usize,
}

impl PValueMatrix {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn countries(&self) -> Vec<Country> {
        self.nodes.iter().map(|n| n.country).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.label.clone()).collect()
    }

    /// Restricts to the given rows, keeping their order.
    pub fn select(&self, idx: &[usize]) -> PValueMatrix {
        let k = idx.len();
        PValueMatrix {
            nodes: idx.iter().map(|&i| self.nodes[i].clone()).collect(),
            p: Array2::from_shape_fn((k, k), |(a, b)| self.p[[idx[a], idx[b]]]),
            sign: Array2::from_shape_fn((k, k), |(a, b)| self.sign[[idx[a], idx[b]]]),
            frequency: self.frequency,
            level: self.level,
        }
    }

    /// Writes `p` and `sign` as two CSV files with a `label,country,sector` prefix.
    pub fn write_csv(&self, p_path: &Path, sign_path: &Path) -> Result<()> {
        self.write_one(p_path, "pvalues", |i, j| crate::market::fmt_cell(self.p[[i, j]]))?;
        self.write_one(sign_path, "signs", |i, j| self.sign[[i, j]].to_string())
    }

    fn write_one(&self, path: &Path, what: &str, cell: impl Fn(usize, usize) -> String) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(
            w,
            "# {what} frequency={} level={}",
            self.frequency.as_str(),
            self.level.as_str()
        )
        .map_err(io)?;
        let header: Vec<&str> = self.nodes.iter().map(|n| n.label.as_str()).collect();
        writeln!(w, "label,country,sector,{}", header.join(",")).map_err(io)?;
        for (i, node) in self.nodes.iter().enumerate() {
            let cells: Vec<String> = (0..self.len()).map(|j| cell(i, j)).collect();
            writeln!(
                w,
                "{},{},{},{}",
                node.label,
                node.country.code(),
                node.sector.map(|s| s.short()).unwrap_or(""),
                cells.join(",")
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(p_path: &Path, sign_path: &Path) -> Result<PValueMatrix> {
        let (nodes, (freq, level), p) = read_square(p_path)?;
        let (sign_nodes, _, s) = read_square(sign_path)?;
        if sign_nodes != nodes {
            return Err(Error::Config(format!(
                "{} and {} list different nodes",
                p_path.display(),
                sign_path.display()
            )));
        }
        let sign = s.mapv(|v| if v.is_nan() { 0 } else { v as i8 });
        Ok(PValueMatrix {
            nodes,
            p,
            sign,
            frequency: freq,
            level,
        })
    }
}

fn read_square(path: &Path) -> Result<(Vec<Node>, (Frequency, Level), Array2<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut frequency = Frequency::Daily;
    let mut level = Level::Stock;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (mut ln, mut header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
    if let Some(comment) = header.strip_prefix('#') {
        for tok in comment.split_whitespace() {
            if tok == "frequency=weekly" {
                frequency = Frequency::Weekly;
            } else if let Some(l) = tok.strip_prefix("level=").and_then(Level::parse) {
                level = l;
            }
        }
        (ln, header) = lines.next().ok_or_else(|| perr(ln + 2, "missing header".into()))?;
    }
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[..3] != ["label", "country", "sector"] {
        return Err(perr(ln + 1, "expected header label,country,sector,...".into()));
    }
    let labels: Vec<String> = cols[3..].iter().map(|s| s.to_string()).collect();
    let k = labels.len();
    let mut nodes = Vec::with_capacity(k);
    let mut m = Array2::from_elem((k, k), f64::NAN);
    for (i, (ln, line)) in lines.enumerate() {
        if i >= k {
            return Err(perr(ln + 1, "more rows than columns".into()));
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != k + 3 {
            return Err(perr(ln + 1, format!("expected {} fields, got {}", k + 3, f.len())));
        }
        if f[0] != labels[i] {
            return Err(perr(
                ln + 1,
                format!("row '{}' does not match column '{}'", f[0], labels[i]),
            ));
        }
        let country = f[1].parse().map_err(|e: Error| perr(ln + 1, e.to_string()))?;
        let sector = if f[2].is_empty() {
            None
        } else {
            Some(f[2].parse().map_err(|e: Error| perr(ln + 1, e.to_string()))?)
        };
        nodes.push(Node {
            label: f[0].to_string(),
            country,
            sector,
        });
        for j in 0..k {
            let cell = f[j + 3].trim();
            if !cell.is_empty() {
                m[[i, j]] = cell
                    .parse()
                    .map_err(|_| perr(ln + 1, format!("invalid number '{cell}'")))?;
            }
        }
    }
    if nodes.len() != k {
        return Err(perr(0, format!("expected {k} rows, got {}", nodes.len())));
    }
    Ok((nodes, (frequency, level), m))
}

/// Estimates every unordered pair in both directions.
pub fn estimate_all_pairs(
    panel: &FilteredPanel,
    meta: &[AssetMeta],
    cfg: &PairConfig,
    exec: Execution,
) -> Result<(PValueMatrix, SweepReport)> {
    let meta = align_meta(&panel.assets, meta)?;
    let n = panel.n_assets();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| panel.series(j)).collect();
    let pairs = upper_pairs(n);
    let results = map_indices(pairs.len(), exec, |k| {
        let (i, j) = pairs[k];
        let fwd = estimate_pair(&cols[i], &cols[j], cfg)?;
        let back = estimate_pair(&cols[j], &cols[i], cfg)?;
        Ok::<_, Error>((fwd, back))
    });

    let mut p = Array2::from_elem((n, n), f64::NAN);
    let mut sign = Array2::zeros((n, n));
    let mut report = SweepReport {
        pairs: pairs.len(),
        ..SweepReport::default()
    };
    for (&(i, j), res) in pairs.iter().zip(results) {
        match res {
            Ok((fwd, back)) => {
                let v = 0.5 * (fwd.pvalue + back.pvalue);
                let s = if fwd.sign() == back.sign() {
                    fwd.sign()
                } else {
                    report.sign_conflicts += 1;
                    0
                };
                p[[i, j]] = v;
                p[[j, i]] = v;
                sign[[i, j]] = s;
                sign[[j, i]] = s;
            }
            Err(e) => {
                log::debug!("pair {} / {} skipped: {e}", panel.assets[i], panel.assets[j]);
                report.skipped += 1;
            }
        }
    }
    if report.pairs > 0 && report.skipped as f64 > cfg.max_skip_fraction * report.pairs as f64 {
        return Err(Error::InsufficientData(format!(
            "{} of {} pairs skipped",
            report.skipped, report.pairs
        )));
    }
    Ok((
        PValueMatrix {
            nodes: meta.iter().map(Node::from_meta).collect(),
            p,
            sign,
            frequency: panel.frequency,
            level: Level::Stock,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StudentT};

    fn t5(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let d = StudentT::new(5.0).unwrap();
        (0..n).map(|_| d.sample(rng)).collect()
    }

    fn symmetric(m: &Array2<f64>) -> bool {
        m.indexed_iter().all(|((i, j), &v)| v.to_bits() == m[[j, i]].to_bits())
    }

    fn panel_of(cols: &[Vec<f64>]) -> (FilteredPanel, Vec<AssetMeta>) {
        let t = cols[0].len();
        let d0 = NaiveDate::from_ymd_opt(2010, 1, 4).unwrap();
        let assets: Vec<String> = (0..cols.len()).map(|i| format!("A{i:03}")).collect();
        let meta = assets
            .iter()
            .enumerate()
            .map(|(i, a)| AssetMeta {
                asset_id: a.clone(),
                country: Country::ALL[i % 15],
                sector: Sector::ALL[i % 10],
            })
            .collect();
        (
            FilteredPanel {
                dates: (0..t).map(|k| d0 + chrono::Days::new(k as u64)).collect(),
                assets,
                filtered: Array2::from_shape_fn((t, cols.len()), |(r, c)| cols[c][r]),
                frequency: Frequency::Daily,
            },
            meta,
        )
    }

    #[test]
    fn identical_and_mirrored() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = t5(&mut rng, 200);
        let e = estimate_pair(&x, &x, &PairConfig::default()).unwrap();
        assert!((e.beta1 - 1.0).abs() < 1e-12 && e.pvalue < 1e-12 && e.se_beta1 > 0.0);
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let e = estimate_pair(&x, &y, &PairConfig::default()).unwrap();
        assert!((e.beta1 + 1.0).abs() < 1e-12 && e.pvalue < 1e-12);
        assert_eq!(e.sign(), -1);
    }

    #[test]
    fn overlap_and_constant_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = t5(&mut rng, 100);
        let y = t5(&mut rng, 100);
        for v in x.iter_mut().skip(40) {
            *v = f64::NAN;
        }
        assert!(matches!(
            estimate_pair(&x, &y, &PairConfig::default()),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            estimate_pair(&[1.0; 100], &y, &PairConfig::default()),
            Err(Error::Estimation(_))
        ));
    }

    #[test]
    fn null_pvalues_are_uniform() {
        let cfg = PairConfig::default();
        let ps = map_indices(2000, Execution::Parallel, |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
            let x = t5(&mut rng, 365);
            let y = t5(&mut rng, 365);
            estimate_pair(&x, &y, &cfg).unwrap().pvalue
        });
        let ks = crate::stats::ks_uniform(&ps);
        assert!(ks < 0.05, "KS distance {ks}");
        for gamma in [0.01, 0.05, 0.1] {
            let rate = ps.iter().filter(|&&p| p < gamma).count() as f64 / ps.len() as f64;
            assert!((rate - gamma).abs() <= 0.02, "gamma {gamma}: rate {rate}");
        }
    }

    #[test]
    fn independent_panel_false_positive_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // 46 assets give 1035 pairs.
        let cols: Vec<Vec<f64>> = (0..46).map(|_| t5(&mut rng, 365)).collect();
        let (panel, meta) = panel_of(&cols);
        let cfg = PairConfig::default();
        let (m, rep) = estimate_all_pairs(&panel, &meta, &cfg, Execution::Parallel).unwrap();
        assert_eq!(rep.skipped, 0);
        let (mut one_way, mut averaged) = (0, 0);
        for (i, j) in upper_pairs(46) {
            one_way += (estimate_pair(&cols[i], &cols[j], &cfg).unwrap().pvalue < 0.1) as usize;
            averaged += (m.p[[i, j]] < 0.1) as usize;
        }
        let one_way = one_way as f64 / rep.pairs as f64;
        let averaged = averaged as f64 / rep.pairs as f64;
        assert!((one_way - 0.1).abs() <= 0.02, "one-way rate {one_way}");
        // The two directions are only partly correlated under heavy tails, so
        // their mean p-value is conservative.
        assert!((0.04..=0.1).contains(&averaged), "averaged rate {averaged}");
    }

    #[test]
    fn correlated_pairs_are_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, b) = (0.3f64.sqrt(), 0.7f64.sqrt());
        let mut hits = 0;
        for _ in 0..200 {
            let f = t5(&mut rng, 365);
            let x: Vec<f64> = f.iter().zip(t5(&mut rng, 365)).map(|(f, e)| a * f + b * e).collect();
            let y: Vec<f64> = f.iter().zip(t5(&mut rng, 365)).map(|(f, e)| a * f + b * e).collect();
            hits += (estimate_pair(&x, &y, &PairConfig::default()).unwrap().pvalue < 0.1) as usize;
        }
        assert!(hits >= 190, "{hits} of 200");
    }

    #[test]
    fn three_assets_shape_and_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cols: Vec<Vec<f64>> = (0..3).map(|_| t5(&mut rng, 120)).collect();
        let (panel, meta) = panel_of(&cols);
        let (m, _) = estimate_all_pairs(&panel, &meta, &PairConfig::default(), Execution::Sequential).unwrap();
        let defined = m.p.iter().filter(|v| !v.is_nan()).count();
        assert_eq!(defined, 6);
        assert!(symmetric(&m.p));
        assert!((0..3).all(|i| m.p[[i, i]].is_nan()));

        let dir = tempfile::tempdir().unwrap();
        let (pp, sp) = (dir.path().join("p.csv"), dir.path().join("s.csv"));
        m.write_csv(&pp, &sp).unwrap();
        let back = PValueMatrix::read_csv(&pp, &sp).unwrap();
        assert_eq!(back.nodes, m.nodes);
        assert_eq!(back.sign, m.sign);
        for (a, b) in back.p.iter().zip(m.p.iter()) {
            assert!(a == b || (a.is_nan() && b.is_nan()));
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cols: Vec<Vec<f64>> = (0..8).map(|_| t5(&mut rng, 150)).collect();
        let (panel, meta) = panel_of(&cols);
        let cfg = PairConfig::default();
        let (a, _) = estimate_all_pairs(&panel, &meta, &cfg, Execution::Sequential).unwrap();
        let (b, _) = estimate_all_pairs(&panel, &meta, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.sign, b.sign);
        for (x, y) in a.p.iter().zip(b.p.iter()) {
            assert!(x == y || (x.is_nan() && y.is_nan()));
        }
    }

    #[test]
    fn too_many_skips_abort() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cols: Vec<Vec<f64>> = (0..4).map(|_| t5(&mut rng, 100)).collect();
        for v in cols[0].iter_mut().skip(30) {
            *v = f64::NAN;
        }
        let (panel, meta) = panel_of(&cols);
        let res = estimate_all_pairs(&panel, &meta, &PairConfig::default(), Execution::Sequential);
        assert!(matches!(res, Err(Error::InsufficientData(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn matrix_is_symmetric_in_unit_interval(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols: Vec<Vec<f64>> = (0..4).map(|_| t5(&mut rng, 80)).collect();
            let (panel, meta) = panel_of(&cols);
            let (m, _) = estimate_all_pairs(&panel, &meta, &PairConfig::default(), Execution::Sequential).unwrap();
            prop_assert!(symmetric(&m.p));
            prop_assert_eq!(&m.sign, &m.sign.t());
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        prop_assert!((0.0..=1.0).contains(&m.p[[i, j]]));
                    }
                }
            }
        }
    }
}
