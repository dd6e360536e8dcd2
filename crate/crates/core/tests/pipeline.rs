//! End-to-end checks across module boundaries.

use comove::exec::Execution;
use comove::market::{align_and_filter, compute_log_returns, load_prices, FilterRules, ReturnPanel};
use comove::pairwise::{estimate_all_pairs, PairConfig};
use comove::rolling::{analyze_full_sample, rolling_report, run_windows, AnalysisConfig};
use comove::stats::pearson;
use comove::synthetic::{simulate_panel, Loading, SyntheticSpec};
use comove::{Country, Sector};

fn structured(n_obs: usize, seed: u64) -> SyntheticSpec {
    let mut spec = SyntheticSpec::grid(
        &[Country::Usa, Country::Ger, Country::Jpn],
        &[Sector::Energy, Sector::Financials],
        3,
        n_obs,
        seed,
    );
    for c in &mut spec.cells {
        c.global = Loading::Constant(0.3);
        c.country_loading = Loading::Constant(0.5);
        c.sector_loading = Loading::Constant(0.4);
    }
    spec
}

#[test]
fn shock_correlation_converges_to_implied() {
    let panel = simulate_panel(&structured(5000, 11)).unwrap();
    let n = panel.meta.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let r = pearson(&panel.shocks.column(i).to_vec(), &panel.shocks.column(j).to_vec());
            worst = worst.max((r - panel.implied_corr[[i, j]]).abs());
        }
    }
    assert!(worst < 0.05, "max deviation {worst}");
}

#[test]
fn files_roundtrip_through_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_panel(&structured(300, 12)).unwrap();
    let (pp, mp) = (dir.path().join("prices.csv"), dir.path().join("meta.csv"));
    sim.write(&pp, &mp).unwrap();
    let (panel, meta) = load_prices(&pp, None, &mp).unwrap();
    let (panel, report) = align_and_filter(&panel, &meta, &FilterRules::default()).unwrap();
    assert!(report.dropped.is_empty());
    assert_eq!(report.dates_removed, 0);
    let r = compute_log_returns(&panel).unwrap();
    assert_eq!(r.n_assets(), sim.returns.n_assets());
    assert_eq!(r.dates, sim.returns.dates);
    for (j, name) in r.assets.iter().enumerate() {
        let k = sim.returns.assets.iter().position(|a| a == name).unwrap();
        for t in 0..r.n_obs() {
            let (a, b) = (r.returns[[t, j]], sim.returns.returns[[t, k]]);
            assert!((a - b).abs() < 1e-9, "{name} at {t}: {a} vs {b}");
        }
    }
}

fn permuted(r: &ReturnPanel, order: &[usize]) -> ReturnPanel {
    r.select_assets(order)
}

#[test]
fn asset_order_does_not_change_results() {
    let sim = simulate_panel(&structured(600, 13)).unwrap();
    let returns = compute_log_returns(&sim.prices).unwrap();
    let n = returns.n_assets();
    let order: Vec<usize> = (0..n).rev().collect();
    let shuffled = permuted(&returns, &order);
    let cfg = AnalysisConfig::default();
    let a = analyze_full_sample(&returns, &sim.meta, &cfg, Execution::Parallel).unwrap();
    let b = analyze_full_sample(&shuffled, &sim.meta, &cfg, Execution::Parallel).unwrap();
    assert_eq!(a.sector.labels(), b.sector.labels());
    for (x, y) in a.sector.p.iter().zip(b.sector.p.iter()) {
        assert!(x.is_nan() && y.is_nan() || (x - y).abs() < 1e-12, "{x} vs {y}");
    }
    assert_eq!(a.sector_network.edges().len(), b.sector_network.edges().len());
    assert_eq!(a.correction.pc, b.correction.pc);

    let mut cfg = cfg;
    cfg.window.length = 200;
    cfg.window.step = 100;
    let ra = rolling_report(&run_windows(&returns, &sim.meta, &cfg, Some(&a.correction), Execution::Parallel).unwrap())
        .unwrap();
    let rb =
        rolling_report(&run_windows(&shuffled, &sim.meta, &cfg, Some(&b.correction), Execution::Parallel).unwrap())
            .unwrap();
    assert_eq!(ra.windows.len(), rb.windows.len());
    for (x, y) in ra.windows.iter().zip(&rb.windows) {
        assert_eq!(x.counts, y.counts);
        assert!((x.stats.avg_strength - y.stats.avg_strength).abs() < 1e-12);
    }
}

#[test]
fn planted_blocks_are_recovered_at_stock_level() {
    let sim = simulate_panel(&structured(600, 14)).unwrap();
    let cfg = AnalysisConfig::default();
    let st = analyze_full_sample(&sim.returns, &sim.meta, &cfg, Execution::Parallel).unwrap();
    // every pair shares at least the global factor (corr 0.09), same-country pairs far more
    let p = &st.corrected;
    let n = p.len();
    let mut same_country = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if p.nodes[i].country == p.nodes[j].country {
                same_country.push(p.p[[i, j]]);
            }
        }
    }
    let linked = same_country.iter().filter(|&&v| v < cfg.gamma).count();
    assert_eq!(linked, same_country.len(), "{same_country:?}");
}

#[test]
fn weekly_sweep_uses_fewer_points_but_same_pairs() {
    let sim = simulate_panel(&structured(600, 15)).unwrap();
    let (dfit, wfit, assets) =
        comove::rolling::filter_both(&sim.returns, &AnalysisConfig::default(), Execution::Parallel).unwrap();
    let fd = comove::rolling::select_filtered(&dfit.filtered, &assets);
    let fw = comove::rolling::select_filtered(&wfit.filtered, &assets);
    assert!(fw.dates.len() * 4 < fd.dates.len());
    let (pd, rd) = estimate_all_pairs(&fd, &sim.meta, &PairConfig::default(), Execution::Parallel).unwrap();
    let (pw, rw) = estimate_all_pairs(&fw, &sim.meta, &PairConfig::default(), Execution::Parallel).unwrap();
    assert_eq!(rd.pairs, rw.pairs);
    assert_eq!(pd.labels(), pw.labels());
}
