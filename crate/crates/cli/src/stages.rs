//! One function per subcommand. Each stage reads earlier artifacts from the
//! output directory and writes its own under fixed names.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use comove::exec::map_indices;
use comove::garch::{fit_t_df, mean_abs_acf, FilteredPanel};
use comove::market::{
    align_and_filter, compute_log_returns, descriptive_stats, load_prices, read_meta, write_meta, AssetMeta, Frequency,
    ReturnPanel,
};
use comove::network::{
    assortativity, country_pair_medians, export_network, hypothesis_partition, network_stats, significant_link_counts,
    DependencyNetwork, ExportFormat, Hypothesis,
};
use comove::pairwise::{
    apply_timing_correction, compute_timing_correction, estimate_all_pairs, volatility_correlation, CorrectionFactors,
    PValueMatrix,
};
use comove::rolling::{build_networks, filter_both, rolling_report, run_windows, select_filtered};
use comove::synthetic::{simulate_panel_with, Loading, SyntheticSpec};
use comove::{Country, Sector};
use serde::Serialize;

use crate::config::PipelineConfig;

/// Prior artifacts and the command that writes them.
pub const STAGES: [(&str, &[&str]); 8] = [
    ("simulate", &["prices.csv", "meta.csv"]),
    (
        "ingest",
        &[
            "returns_daily.csv",
            "assets.csv",
            "filter_report.json",
            "table2_stats.csv",
            "figA1_sector_corr.csv",
        ],
    ),
    (
        "fit",
        &[
            "garch_daily.csv",
            "garch_weekly.csv",
            "filtered_daily.csv",
            "filtered_weekly.csv",
            "variances_daily.csv",
            "figA2_acf.csv",
            "figA3_tdf.csv",
            "figC1_volatility.csv",
        ],
    ),
    (
        "estimate",
        &[
            "pvalues_daily.csv",
            "signs_daily.csv",
            "pvalues_weekly.csv",
            "signs_weekly.csv",
            "sweep_report.json",
        ],
    ),
    (
        "correct",
        &["correction.csv", "pvalues_corrected.csv", "signs_corrected.csv"],
    ),
    (
        "network",
        &[
            "network.gexf",
            "network.graphml",
            "edges_sector.csv",
            "network_country.gexf",
            "edges_country.csv",
            "pvalues_sector.csv",
            "signs_sector.csv",
            "network_stats.json",
            "fig4_counts.csv",
            "table3_medians.csv",
            "table5_static.csv",
        ],
    ),
    (
        "rolling",
        &[
            "rolling_report.json",
            "fig5_counts.csv",
            "fig5_fractions.csv",
            "table4_stats.csv",
            "table5_assortativity.csv",
            "fig6_sector_matrix.csv",
        ],
    ),
    ("report", &["report/index.json"]),
];

pub struct Ctx {
    pub cfg: PipelineConfig,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out_dir.join(name)
    }

    /// Path of an artifact written by `stage`; errors if it does not exist yet.
    fn require(&self, name: &str, stage: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.is_file() {
            bail!("missing {}: run `comove {stage}` first", p.display());
        }
        Ok(p)
    }

    fn meta(&self) -> Result<Vec<AssetMeta>> {
        Ok(read_meta(&self.require("assets.csv", "ingest")?)?)
    }

    fn exec(&self) -> comove::Execution {
        self.cfg.execution
    }
}

struct Table {
    w: BufWriter<File>,
    path: PathBuf,
}

impl Table {
    /// Opens `path` and writes the `# name` tag line and the column header.
    fn create(path: PathBuf, header: &str) -> Result<Table> {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut t = Table {
            w: BufWriter::new(f),
            path,
        };
        t.line(&format!("# {name}"))?;
        t.line(header)?;
        Ok(t)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.w, "{s}").with_context(|| format!("writing {}", self.path.display()))
    }

    fn finish(mut self) -> Result<()> {
        self.w
            .flush()
            .with_context(|| format!("writing {}", self.path.display()))
    }
}

fn cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub spec: Option<PathBuf>,
    pub per_cell: usize,
    pub n_obs: usize,
}

/// Three markets, two sectors, moderate global/country/sector factors.
pub fn toy_spec(per_cell: usize, n_obs: usize, seed: u64) -> SyntheticSpec {
    let mut spec = SyntheticSpec::grid(
        &[Country::Usa, Country::Gbr, Country::Jpn],
        &[Sector::Energy, Sector::Financials],
        per_cell,
        n_obs,
        seed,
    );
    for c in &mut spec.cells {
        c.global = Loading::Constant(0.3);
        c.country_loading = Loading::Constant(0.4);
        c.sector_loading = Loading::Constant(0.3);
    }
    spec
}

pub fn simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<String> {
    let spec = match &args.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<SyntheticSpec>(&text).with_context(|| format!("invalid spec in {}", p.display()))?
        }
        None => toy_spec(args.per_cell, args.n_obs, ctx.cfg.seed),
    };
    let panel = simulate_panel_with(&spec, ctx.exec())?;
    panel.write(&ctx.path("prices.csv"), &ctx.path("meta.csv"))?;
    Ok(format!(
        "simulate: {} assets x {} returns (seed {}) -> prices.csv, meta.csv",
        panel.meta.len(),
        spec.n_obs,
        spec.seed
    ))
}

pub fn ingest(ctx: &Ctx) -> Result<String> {
    let input = &ctx.cfg.input;
    let prices = match &input.prices {
        Some(p) => p.clone(),
        None => ctx.require("prices.csv", "simulate` or pass `--prices")?,
    };
    let meta_path = match &input.meta {
        Some(p) => p.clone(),
        None => ctx.require("meta.csv", "simulate` or pass `--meta")?,
    };
    let (panel, meta) = load_prices(&prices, input.volumes.as_deref(), &meta_path)?;
    let (panel, meta, report) = {
        let n_in = panel.n_assets();
        let (kept, report) = align_and_filter(&panel, &meta, &ctx.cfg.filter_rules())?;
        let meta: Vec<AssetMeta> = meta.into_iter().filter(|m| kept.assets.contains(&m.asset_id)).collect();
        log::info!("liquidity screens kept {} of {n_in} assets", kept.n_assets());
        (kept, meta, report)
    };
    let returns = compute_log_returns(&panel)?;
    returns.write_csv(&ctx.path("returns_daily.csv"))?;
    write_meta(&ctx.path("assets.csv"), &meta)?;
    write_json(&ctx.path("filter_report.json"), &report)?;

    let stats = descriptive_stats(&returns, &meta, &ctx.cfg.stats_config())?;
    stats.write_country_csv(&ctx.path("table2_stats.csv"))?;
    let mut t = Table::create(
        ctx.path("figA1_sector_corr.csv"),
        "country,sector,n_assets,n_pairs,mean_corr",
    )?;
    for s in &stats.sectors {
        t.line(&format!(
            "{},{},{},{},{}",
            s.country,
            s.sector.short(),
            s.n_assets,
            s.n_pairs,
            cell(s.mean_corr)
        ))?;
    }
    t.finish()?;
    Ok(format!(
        "ingest: {} assets, {} dates, {} dropped, {} dates removed",
        returns.n_assets(),
        returns.n_obs(),
        report.dropped.len(),
        report.dates_removed
    ))
}

pub fn fit(ctx: &Ctx) -> Result<String> {
    let daily = ReturnPanel::read_csv(&ctx.require("returns_daily.csv", "ingest")?, Frequency::Daily)?;
    let meta = ctx.meta()?;
    let exec = ctx.exec();
    let (dfit, wfit, assets) = filter_both(&daily, &ctx.cfg.analysis, exec)?;
    dfit.write_csv(&ctx.path("garch_daily.csv"))?;
    wfit.write_csv(&ctx.path("garch_weekly.csv"))?;
    let fd = select_filtered(&dfit.filtered, &assets);
    fd.write_csv(&ctx.path("filtered_daily.csv"))?;
    select_filtered(&wfit.filtered, &assets).write_csv(&ctx.path("filtered_weekly.csv"))?;
    let variances = dfit.variances();
    FilteredPanel {
        filtered: variances.clone(),
        ..dfit.filtered.clone()
    }
    .write_csv(&ctx.path("variances_daily.csv"))?;

    // Volatility clustering before and after filtering, averaged over assets.
    let raw: Vec<Vec<f64>> = assets
        .iter()
        .map(|a| daily.series(daily.assets.iter().position(|b| b == a).expect("asset present")))
        .collect();
    let filt: Vec<Vec<f64>> = (0..fd.n_assets()).map(|j| fd.series(j)).collect();
    let max_lag = 50.min(daily.n_obs() / 4).max(1);
    let acf_raw = mean_abs_acf(&raw, max_lag)?;
    let acf_filt = mean_abs_acf(&filt, max_lag)?;
    let mut t = Table::create(ctx.path("figA2_acf.csv"), "lag,raw,filtered,band")?;
    for l in 0..max_lag {
        t.line(&format!(
            "{},{},{},{}",
            l + 1,
            cell(acf_raw.values[l]),
            cell(acf_filt.values[l]),
            acf_filt.band
        ))?;
    }
    t.finish()?;

    let nus = map_indices(filt.len(), exec, |j| fit_t_df(&filt[j]));
    let mut t = Table::create(ctx.path("figA3_tdf.csv"), "asset_id,nu")?;
    for (a, nu) in assets.iter().zip(&nus) {
        match nu {
            Ok(v) => t.line(&format!("{a},{v}"))?,
            Err(e) => {
                log::info!("no tail fit for {a}: {e}");
                t.line(&format!("{a},"))?;
            }
        }
    }
    t.finish()?;

    let countries: Vec<Country> = comove::market::align_meta(&dfit.filtered.assets, &meta)?
        .iter()
        .map(|m| m.country)
        .collect();
    let vc = volatility_correlation(&variances, &dfit.filtered.filtered, &countries, exec)?;
    let mut t = Table::create(
        ctx.path("figC1_volatility.csv"),
        "country_a,country_b,volatility_corr,return_corr",
    )?;
    for (a, b, v, r) in vc.points() {
        t.line(&format!("{a},{b},{},{}", cell(v), cell(r)))?;
    }
    t.finish()?;

    Ok(format!(
        "fit: {} of {} assets converged at both frequencies, filtered |r| ACF inside band {:.1}%",
        assets.len(),
        daily.n_assets(),
        100.0 * acf_filt.fraction_inside()
    ))
}

pub fn estimate(ctx: &Ctx) -> Result<String> {
    let fd = FilteredPanel::read_csv(&ctx.require("filtered_daily.csv", "fit")?, Frequency::Daily)?;
    let fw = FilteredPanel::read_csv(&ctx.require("filtered_weekly.csv", "fit")?, Frequency::Weekly)?;
    let meta = ctx.meta()?;
    let pairs = &ctx.cfg.analysis.pairs;
    let (pd, sd) = estimate_all_pairs(&fd, &meta, pairs, ctx.exec())?;
    let (pw, sw) = estimate_all_pairs(&fw, &meta, pairs, ctx.exec())?;
    pd.write_csv(&ctx.path("pvalues_daily.csv"), &ctx.path("signs_daily.csv"))?;
    pw.write_csv(&ctx.path("pvalues_weekly.csv"), &ctx.path("signs_weekly.csv"))?;
    write_json(
        &ctx.path("sweep_report.json"),
        &serde_json::json!({ "daily": sd, "weekly": sw }),
    )?;
    Ok(format!(
        "estimate: {} pairs per frequency, skipped {} daily / {} weekly, sign conflicts {} / {}",
        sd.pairs, sd.skipped, sw.skipped, sd.sign_conflicts, sw.sign_conflicts
    ))
}

pub fn correct(ctx: &Ctx) -> Result<String> {
    let pd = PValueMatrix::read_csv(
        &ctx.require("pvalues_daily.csv", "estimate")?,
        &ctx.require("signs_daily.csv", "estimate")?,
    )?;
    let pw = PValueMatrix::read_csv(
        &ctx.require("pvalues_weekly.csv", "estimate")?,
        &ctx.require("signs_weekly.csv", "estimate")?,
    )?;
    let cf = compute_timing_correction(&pw, &pd)?;
    let corrected = apply_timing_correction(&pd, &cf)?;
    cf.write_csv(&ctx.path("correction.csv"))?;
    corrected.write_csv(&ctx.path("pvalues_corrected.csv"), &ctx.path("signs_corrected.csv"))?;
    let gamma = ctx.cfg.analysis.gamma;
    let below = |m: &PValueMatrix| m.p.iter().filter(|&&p| p < gamma).count() / 2;
    Ok(format!(
        "correct: {} markets, within-market ratio {:.4}, pairs below {gamma}: {} daily -> {} corrected",
        (0..cf.countries.len())
            .filter(|&i| cf.pair_counts.row(i).sum() > 0)
            .count(),
        cf.diag_mean,
        below(&pd),
        below(&corrected)
    ))
}

fn static_assortativity(net: &DependencyNetwork) -> Vec<(Hypothesis, Option<f64>)> {
    Hypothesis::ALL
        .iter()
        .map(|&h| {
            let ac = hypothesis_partition(&net.nodes, h)
                .and_then(|part| assortativity(net, &part))
                .ok();
            (h, ac)
        })
        .collect()
}

pub fn network(ctx: &Ctx) -> Result<String> {
    let corrected = PValueMatrix::read_csv(
        &ctx.require("pvalues_corrected.csv", "correct")?,
        &ctx.require("signs_corrected.csv", "correct")?,
    )?;
    let cfg = &ctx.cfg.analysis;
    let (sector, sector_net, _country, country_net) = build_networks(&corrected, cfg)?;
    sector.write_csv(&ctx.path("pvalues_sector.csv"), &ctx.path("signs_sector.csv"))?;
    export_network(&sector_net, ExportFormat::Gexf, &ctx.path("network.gexf"))?;
    export_network(&sector_net, ExportFormat::Graphml, &ctx.path("network.graphml"))?;
    export_network(&sector_net, ExportFormat::EdgeCsv, &ctx.path("edges_sector.csv"))?;
    export_network(&country_net, ExportFormat::Gexf, &ctx.path("network_country.gexf"))?;
    export_network(&country_net, ExportFormat::EdgeCsv, &ctx.path("edges_country.csv"))?;

    let stats = network_stats(&sector_net);
    write_json(
        &ctx.path("network_stats.json"),
        &serde_json::json!({
            "gamma": cfg.gamma,
            "country_gamma": cfg.country_gamma,
            "sector": stats,
            "country": network_stats(&country_net),
        }),
    )?;

    let counts = significant_link_counts(&sector_net);
    let mut t = Table::create(ctx.path("fig4_counts.csv"), "kind,group,links,fraction")?;
    for ((c, n), f) in Country::ALL
        .iter()
        .zip(&counts.by_country)
        .zip(counts.country_fractions())
    {
        t.line(&format!("country,{c},{n},{f}"))?;
    }
    for ((s, n), f) in Sector::ALL.iter().zip(&counts.by_sector).zip(counts.sector_fractions()) {
        t.line(&format!("sector,{},{n},{f}", s.short()))?;
    }
    t.finish()?;

    let med = country_pair_medians(&corrected, cfg.min_sector_size)?;
    let mut t = Table::create(
        ctx.path("table3_medians.csv"),
        "country_a,country_b,stock_median,sector_median",
    )?;
    let k = med.countries.len();
    for a in 0..k {
        for b in a..k {
            if med.stock[[a, b]].is_nan() && med.sector[[a, b]].is_nan() {
                continue;
            }
            t.line(&format!(
                "{},{},{},{}",
                med.countries[a],
                med.countries[b],
                cell(med.stock[[a, b]]),
                cell(med.sector[[a, b]])
            ))?;
        }
    }
    t.finish()?;

    let mut t = Table::create(ctx.path("table5_static.csv"), "hypothesis,assortativity")?;
    for (h, ac) in static_assortativity(&sector_net) {
        t.line(&format!(
            "{},{}",
            h.name(),
            ac.map(|v| v.to_string()).unwrap_or_default()
        ))?;
    }
    t.finish()?;

    Ok(format!(
        "network: gamma {}: {} sector nodes, {} links, density {:.3}; {} country links at {}",
        cfg.gamma,
        sector_net.n_nodes(),
        sector_net.n_edges(),
        stats.density,
        country_net.n_edges(),
        cfg.country_gamma
    ))
}

pub fn rolling(ctx: &Ctx) -> Result<String> {
    let daily = ReturnPanel::read_csv(&ctx.require("returns_daily.csv", "ingest")?, Frequency::Daily)?;
    let meta = ctx.meta()?;
    let fallback = CorrectionFactors::read_csv(&ctx.require("correction.csv", "correct")?)?;
    let outcomes = run_windows(&daily, &meta, &ctx.cfg.analysis, Some(&fallback), ctx.exec())?;
    let report = rolling_report(&outcomes)?;
    report.write_json(&ctx.path("rolling_report.json"))?;
    report.write_tables(&ctx.cfg.out_dir)?;
    let skipped = report.windows.iter().filter(|w| w.skipped.is_some()).count();
    let links: Vec<String> = report.windows.iter().map(|w| w.counts.links.to_string()).collect();
    Ok(format!(
        "rolling: {} windows ({skipped} skipped), links per window [{}]",
        report.windows.len(),
        links.join(" ")
    ))
}

#[derive(Serialize)]
struct IndexEntry {
    file: String,
    stage: String,
    bytes: u64,
}

pub fn report(ctx: &Ctx) -> Result<String> {
    let dir = ctx.path("report");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut index = Vec::new();
    for (stage, files) in STAGES.iter().filter(|(s, _)| !matches!(*s, "simulate" | "report")) {
        for f in *files {
            let src = ctx.require(f, stage)?;
            let dst = dir.join(f);
            let bytes = std::fs::copy(&src, &dst).with_context(|| format!("copying {}", src.display()))?;
            index.push(IndexEntry {
                file: f.to_string(),
                stage: stage.to_string(),
                bytes,
            });
        }
    }
    write_json(&dir.join("index.json"), &index)?;
    Ok(format!(
        "report: {} artifacts collected in {}",
        index.len(),
        dir.display()
    ))
}
