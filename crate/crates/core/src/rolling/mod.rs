//! Full-sample and rolling-window estimation.
//!
//! A window refits GARCH on its own days, estimates daily pairs, derives a
//! weekly baseline from the same days for the timing correction, then
//! aggregates to country-sector cells and thresholds.

mod report;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::garch::{fit_panel, FilteredPanel, GarchConfig, PanelFit};
use crate::market::{aggregate_weekly, align_meta, weekly_groups, AssetMeta, Frequency, ReturnPanel};
use crate::network::{aggregate_groups, build_adjacency, AdjacencyOptions, DependencyNetwork};
use crate::pairwise::{
    apply_timing_correction, compute_timing_correction, estimate_all_pairs, CorrectionFactors, Level, PValueMatrix,
    PairConfig, SweepReport,
};

pub use report::{rolling_report, RollingReport, WindowRow, NOISY_LINKS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowParams {
    pub length: usize,
    pub step: usize,
    /// A trailing window may be this many days short; it is then right-aligned.
    pub tolerance: usize,
    pub min_usable_days: usize,
    /// Fewer weekly observations than this and the full-sample correction is used.
    pub min_weekly_points: usize,
    /// Assets with a larger share of missing returns inside a window sit that window out.
    pub max_missing_fraction: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        WindowParams {
            length: 190,
            step: 95,
            tolerance: 5,
            min_usable_days: 100,
            min_weekly_points: 27,
            max_missing_fraction: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub gamma: f64,
    pub country_gamma: f64,
    pub min_sector_size: usize,
    pub keep_negative: bool,
    pub garch: GarchConfig,
    pub pairs: PairConfig,
    pub window: WindowParams,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            gamma: 0.1,
            country_gamma: 0.25,
            min_sector_size: 3,
            keep_negative: false,
            garch: GarchConfig::default(),
            pairs: PairConfig::default(),
            window: WindowParams::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn adjacency(&self, gamma: f64) -> AdjacencyOptions {
        AdjacencyOptions {
            gamma,
            keep_negative: self.keep_negative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub index: usize,
    pub start: usize,
    pub len: usize,
}

impl WindowSpec {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    /// Date in the middle of the window.
    pub fn label(&self, dates: &[NaiveDate]) -> NaiveDate {
        dates[self.start + self.len / 2]
    }
}

/// Windows at `0, step, 2 step, ...`; a final window short by at most
/// `tolerance` days is shifted left to end at `t`.
pub fn make_windows(t: usize, length: usize, step: usize, tolerance: usize) -> Result<Vec<WindowSpec>> {
    if length == 0 || step == 0 {
        return Err(Error::Config("window length and step must be positive".into()));
    }
    if length > t {
        return Err(Error::InsufficientData(format!(
            "window length {length} exceeds sample length {t}"
        )));
    }
    let mut out = Vec::new();
    let mut start = 0;
    while start + length <= t {
        out.push(WindowSpec {
            index: out.len(),
            start,
            len: length,
        });
        start += step;
    }
    if start < t && start + length - t <= tolerance {
        let s = t - length;
        if out.last().is_none_or(|w| w.start < s) {
            out.push(WindowSpec {
                index: out.len(),
                start: s,
                len: length,
            });
        }
    }
    Ok(out)
}

/// Weekly filtered returns: the week's summed log return over the square root
/// of the summed daily conditional variance on the same days.
pub fn weekly_from_daily(daily: &ReturnPanel, variances: &Array2<f64>) -> FilteredPanel {
    let groups = weekly_groups(&daily.dates);
    let filtered = Array2::from_shape_fn((groups.len(), daily.n_assets()), |(w, j)| {
        let (mut r, mut h, mut any) = (0.0, 0.0, false);
        for t in groups[w].clone() {
            let x = daily.returns[[t, j]];
            if !x.is_nan() {
                r += x;
                h += variances[[t, j]];
                any = true;
            }
        }
        if any {
            r / h.sqrt()
        } else {
            f64::NAN
        }
    });
    FilteredPanel {
        dates: groups.iter().map(|g| daily.dates[g.end - 1]).collect(),
        assets: daily.assets.clone(),
        filtered,
        frequency: Frequency::Weekly,
    }
}

fn select_by_name(panel: &ReturnPanel, names: &[String]) -> ReturnPanel {
    let cols: Vec<usize> = names
        .iter()
        .map(|n| panel.assets.iter().position(|a| a == n).expect("asset present"))
        .collect();
    panel.select_assets(&cols)
}

/// Columns of `panel` named by `names`, in that order.
pub fn select_filtered(panel: &FilteredPanel, names: &[String]) -> FilteredPanel {
    let cols: Vec<usize> = names
        .iter()
        .map(|n| panel.assets.iter().position(|a| a == n).expect("asset present"))
        .collect();
    FilteredPanel {
        dates: panel.dates.clone(),
        assets: names.to_vec(),
        filtered: Array2::from_shape_fn((panel.dates.len(), cols.len()), |(t, k)| panel.filtered[[t, cols[k]]]),
        frequency: panel.frequency,
    }
}

/// Everything the static (full-sample) analysis produces.
#[derive(Debug, Clone)]
pub struct StaticAnalysis {
    pub daily_fit: PanelFit,
    pub weekly_fit: PanelFit,
    /// Assets whose daily and weekly fits both converged.
    pub assets: Vec<String>,
    pub p_daily: PValueMatrix,
    pub p_weekly: PValueMatrix,
    pub daily_sweep: SweepReport,
    pub weekly_sweep: SweepReport,
    pub correction: CorrectionFactors,
    pub corrected: PValueMatrix,
    pub sector: PValueMatrix,
    pub sector_network: DependencyNetwork,
    pub country: PValueMatrix,
    pub country_network: DependencyNetwork,
}

/// Daily and weekly GARCH filtering over the full sample, keeping assets that converge at both frequencies.
pub fn filter_both(
    daily: &ReturnPanel,
    cfg: &AnalysisConfig,
    exec: Execution,
) -> Result<(PanelFit, PanelFit, Vec<String>)> {
    let weekly = aggregate_weekly(daily)?;
    let daily_fit = fit_panel(daily, &cfg.garch, exec);
    let weekly_fit = fit_panel(&weekly, &cfg.garch, exec);
    let assets: Vec<String> = daily_fit
        .filtered
        .assets
        .iter()
        .filter(|a| weekly_fit.filtered.assets.contains(a))
        .cloned()
        .collect();
    if assets.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} assets survive GARCH filtering",
            assets.len()
        )));
    }
    Ok((daily_fit, weekly_fit, assets))
}

/// From corrected stock-level p-values to sector and country networks.
pub fn build_networks(
    corrected: &PValueMatrix,
    cfg: &AnalysisConfig,
) -> Result<(PValueMatrix, DependencyNetwork, PValueMatrix, DependencyNetwork)> {
    let sector = aggregate_groups(corrected, Level::Sector, cfg.min_sector_size)?;
    let sector_net = build_adjacency(&sector, &cfg.adjacency(cfg.gamma))?;
    let country = aggregate_groups(corrected, Level::Country, 1)?;
    let country_net = build_adjacency(&country, &cfg.adjacency(cfg.country_gamma))?;
    Ok((sector, sector_net, country, country_net))
}

pub fn analyze_full_sample(
    daily: &ReturnPanel,
    meta: &[AssetMeta],
    cfg: &AnalysisConfig,
    exec: Execution,
) -> Result<StaticAnalysis> {
    let (daily_fit, weekly_fit, assets) = filter_both(daily, cfg, exec)?;
    let fd = select_filtered(&daily_fit.filtered, &assets);
    let fw = select_filtered(&weekly_fit.filtered, &assets);
    let (p_daily, daily_sweep) = estimate_all_pairs(&fd, meta, &cfg.pairs, exec)?;
    let (p_weekly, weekly_sweep) = estimate_all_pairs(&fw, meta, &cfg.pairs, exec)?;
    let correction = compute_timing_correction(&p_weekly, &p_daily)?;
    let corrected = apply_timing_correction(&p_daily, &correction)?;
    let (sector, sector_network, country, country_network) = build_networks(&corrected, cfg)?;
    Ok(StaticAnalysis {
        daily_fit,
        weekly_fit,
        assets,
        p_daily,
        p_weekly,
        daily_sweep,
        weekly_sweep,
        correction,
        corrected,
        sector,
        sector_network,
        country,
        country_network,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionSource {
    /// Weekly baseline estimated inside the window.
    Window,
    /// Too few weekly points; the full-sample factors were used.
    FullSample,
    /// Too few weekly points and no full-sample factors supplied.
    Identity,
}

#[derive(Debug, Clone)]
pub struct WindowResult {
    pub window: WindowSpec,
    pub label: NaiveDate,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub assets: Vec<String>,
    pub excluded: Vec<String>,
    pub correction_source: CorrectionSource,
    pub correction: CorrectionFactors,
    pub corrected: PValueMatrix,
    pub sector: PValueMatrix,
    pub network: DependencyNetwork,
}

#[derive(Debug, Clone)]
pub enum WindowOutcome {
    Done(Box<WindowResult>),
    Skipped {
        window: WindowSpec,
        label: NaiveDate,
        reason: String,
    },
}

impl WindowOutcome {
    pub fn window(&self) -> &WindowSpec {
        match self {
            WindowOutcome::Done(r) => &r.window,
            WindowOutcome::Skipped { window, .. } => window,
        }
    }
}

/// Runs one window using only the window's rows of `daily`.
pub fn run_window(
    daily: &ReturnPanel,
    meta: &[AssetMeta],
    window: &WindowSpec,
    cfg: &AnalysisConfig,
    fallback: Option<&CorrectionFactors>,
    exec: Execution,
) -> WindowOutcome {
    let label = window.label(&daily.dates);
    match window_inner(daily, meta, window, cfg, fallback, exec) {
        Ok(r) => WindowOutcome::Done(Box::new(r)),
        Err(e) => {
            log::warn!("window {} ({label}) skipped: {e}", window.index);
            WindowOutcome::Skipped {
                window: *window,
                label,
                reason: e.to_string(),
            }
        }
    }
}

fn window_inner(
    daily: &ReturnPanel,
    meta: &[AssetMeta],
    window: &WindowSpec,
    cfg: &AnalysisConfig,
    fallback: Option<&CorrectionFactors>,
    exec: Execution,
) -> Result<WindowResult> {
    if window.end() > daily.n_obs() {
        return Err(Error::Config(format!(
            "window ends at {} beyond {} rows",
            window.end(),
            daily.n_obs()
        )));
    }
    let slice = daily.slice_rows(window.start, window.end());
    let len = slice.n_obs() as f64;
    let (liquid, mut excluded): (Vec<usize>, Vec<usize>) = (0..slice.n_assets()).partition(|&j| {
        let missing = slice.returns.column(j).iter().filter(|x| x.is_nan()).count();
        missing as f64 / len <= cfg.window.max_missing_fraction
    });
    let slice = slice.select_assets(&liquid);
    let usable = (0..slice.n_obs())
        .filter(|&t| slice.returns.row(t).iter().any(|x| !x.is_nan()))
        .count();
    if usable < cfg.window.min_usable_days {
        return Err(Error::InsufficientData(format!(
            "{usable} usable days, need {}",
            cfg.window.min_usable_days
        )));
    }
    let mut excluded: Vec<String> = excluded.drain(..).map(|j| daily.assets[j].clone()).collect();

    let fit = fit_panel(&slice, &cfg.garch, exec);
    excluded.extend(fit.excluded.iter().map(|e| e.asset_id.clone()));
    excluded.sort();
    let kept = fit.filtered.assets.clone();
    if kept.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} assets survive filtering",
            kept.len()
        )));
    }
    let (p_daily, _) = estimate_all_pairs(&fit.filtered, meta, &cfg.pairs, exec)?;

    let raw = select_by_name(&slice, &kept);
    let weekly = weekly_from_daily(&raw, &fit.variances());
    let weekly_cfg = PairConfig {
        min_obs: cfg.window.min_weekly_points,
        ..cfg.pairs.clone()
    };
    let window_factors = if weekly.dates.len() >= cfg.window.min_weekly_points {
        match estimate_all_pairs(&weekly, meta, &weekly_cfg, exec) {
            Ok((p_weekly, _)) => Some(compute_timing_correction(&p_weekly, &p_daily)?),
            Err(e) => {
                log::warn!("window {}: weekly baseline failed ({e}); using fallback", window.index);
                None
            }
        }
    } else {
        None
    };
    let (correction_source, correction) = match (window_factors, fallback) {
        (Some(f), _) => (CorrectionSource::Window, f),
        (None, Some(f)) => (CorrectionSource::FullSample, f.clone()),
        (None, None) => (CorrectionSource::Identity, CorrectionFactors::identity()),
    };
    let corrected = apply_timing_correction(&p_daily, &correction)?;
    let sector = aggregate_groups(&corrected, Level::Sector, cfg.min_sector_size)?;
    let network = build_adjacency(&sector, &cfg.adjacency(cfg.gamma))?;
    Ok(WindowResult {
        window: *window,
        label: window.label(&daily.dates),
        first_date: slice.dates[0],
        last_date: slice.dates[slice.n_obs() - 1],
        assets: kept,
        excluded,
        correction_source,
        correction,
        corrected,
        sector,
        network,
    })
}

/// All windows of the sample; independent jobs, results in window order.
pub fn run_windows(
    daily: &ReturnPanel,
    meta: &[AssetMeta],
    cfg: &AnalysisConfig,
    fallback: Option<&CorrectionFactors>,
    exec: Execution,
) -> Result<Vec<WindowOutcome>> {
    align_meta(&daily.assets, meta)?;
    let w = &cfg.window;
    let windows = make_windows(daily.n_obs(), w.length, w.step, w.tolerance)?;
    Ok(map_indices(windows.len(), exec, |k| {
        run_window(daily, meta, &windows[k], cfg, fallback, exec)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{simulate_panel, Loading, SyntheticSpec};
    use crate::vocab::{Country, Sector};

    #[test]
    fn window_counts() {
        let w = make_windows(1329, 190, 95, 5).unwrap();
        assert_eq!(w.len(), 13);
        let last = w.last().unwrap();
        assert_eq!(last.end(), 1329);
        assert_eq!(last.start, 1139);
        assert!(w.windows(2).all(|p| p[0].start < p[1].start));
        let w = make_windows(380, 190, 95, 0).unwrap();
        assert_eq!(w.iter().map(|w| w.start).collect::<Vec<_>>(), vec![0, 95, 190]);
        assert!(make_windows(189, 190, 95, 5).is_err());
        assert_eq!(make_windows(1330, 190, 95, 5).unwrap().len(), 13);
        assert_eq!(make_windows(1329, 190, 95, 0).unwrap().len(), 12);
    }

    #[test]
    fn consecutive_windows_overlap() {
        let w = make_windows(1000, 190, 95, 5).unwrap();
        for p in w.windows(2).take(w.len() - 2) {
            assert_eq!(p[0].end() - p[1].start, 95);
        }
    }

    #[test]
    fn weekly_baseline_uses_present_days() {
        let d0 = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..10).map(|k| d0 + chrono::Days::new(k)).collect();
        let mut r = Array2::from_elem((10, 1), 0.01);
        r[[1, 0]] = f64::NAN;
        let panel = ReturnPanel {
            dates,
            assets: vec!["A".into()],
            returns: r,
            frequency: Frequency::Daily,
        };
        let h = Array2::from_elem((10, 1), 1e-4);
        let w = weekly_from_daily(&panel, &h);
        assert_eq!(w.dates.len(), 2);
        assert!((w.filtered[[0, 0]] - 0.06 / (6e-4f64).sqrt()).abs() < 1e-12);
        assert!((w.filtered[[1, 0]] - 0.03 / (3e-4f64).sqrt()).abs() < 1e-12);
    }

    fn stationary(seed: u64, n_obs: usize) -> crate::synthetic::SyntheticPanel {
        let mut spec = SyntheticSpec::grid(
            &[Country::Usa, Country::Gbr],
            &[Sector::Energy, Sector::Financials],
            3,
            n_obs,
            seed,
        );
        for c in &mut spec.cells {
            c.global = Loading::Constant(0.5);
            c.country_loading = Loading::Constant(0.3);
        }
        simulate_panel(&spec).unwrap()
    }

    #[test]
    fn adjacent_windows_are_stable() {
        let p = stationary(21, 380);
        let cfg = AnalysisConfig::default();
        let out = run_windows(&p.returns, &p.meta, &cfg, None, Execution::Parallel).unwrap();
        assert_eq!(out.len(), 3);
        let nets: Vec<_> = out
            .iter()
            .map(|o| match o {
                WindowOutcome::Done(r) => r.network.edge_labels(),
                WindowOutcome::Skipped { reason, .. } => panic!("{reason}"),
            })
            .collect();
        let jac = |a: &Vec<(String, String)>, b: &Vec<(String, String)>| {
            let inter = a.iter().filter(|x| b.contains(x)).count();
            let uni = a.len() + b.len() - inter;
            inter as f64 / uni.max(1) as f64
        };
        assert!(jac(&nets[0], &nets[1]) > 0.5, "{:?} vs {:?}", nets[0], nets[1]);
    }

    #[test]
    fn regime_switch_raises_edge_count() {
        let mut spec = SyntheticSpec::grid(
            &[Country::Usa, Country::Gbr, Country::Jpn],
            &[Sector::Energy, Sector::Financials],
            3,
            380,
            22,
        );
        for c in &mut spec.cells {
            c.global = Loading::Ramp {
                from: 0.0,
                to: 0.4,
                start: 190,
                end: 190,
            };
        }
        let p = simulate_panel(&spec).unwrap();
        let cfg = AnalysisConfig {
            window: WindowParams {
                step: 190,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = run_windows(&p.returns, &p.meta, &cfg, None, Execution::Parallel).unwrap();
        let edges: Vec<usize> = out
            .iter()
            .map(|o| match o {
                WindowOutcome::Done(r) => r.network.n_edges(),
                _ => panic!("skipped"),
            })
            .collect();
        assert!(edges[1] >= edges[0] + 5, "{edges:?}");
    }

    #[test]
    fn skipped_window_is_reported() {
        let p = stationary(23, 200);
        let cfg = AnalysisConfig {
            window: WindowParams {
                length: 90,
                step: 90,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = run_windows(&p.returns, &p.meta, &cfg, None, Execution::Sequential).unwrap();
        assert!(out.iter().all(|o| matches!(o, WindowOutcome::Skipped { .. })));
    }

    #[test]
    fn non_overlapping_windows_match_single_runs() {
        let p = stationary(24, 400);
        let cfg = AnalysisConfig {
            window: WindowParams {
                length: 200,
                step: 200,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = run_windows(&p.returns, &p.meta, &cfg, None, Execution::Parallel).unwrap();
        let second = p.returns.slice_rows(200, 400);
        let alone = run_window(
            &second,
            &p.meta,
            &WindowSpec {
                index: 1,
                start: 0,
                len: 200,
            },
            &cfg,
            None,
            Execution::Sequential,
        );
        match (&out[1], alone) {
            (WindowOutcome::Done(a), WindowOutcome::Done(b)) => {
                assert_eq!(a.network, b.network);
                assert_eq!(a.sector.p.mapv(f64::to_bits), b.sector.p.mapv(f64::to_bits));
            }
            _ => panic!("window skipped"),
        }
    }
}
