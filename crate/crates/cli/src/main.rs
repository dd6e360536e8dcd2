//! `comove`: staged command-line pipeline from prices to dependency networks.

mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use comove::Execution;

use config::PipelineConfig;
use stages::{Ctx, SimulateArgs};

#[derive(Parser, Debug)]
#[command(
    name = "comove",
    version,
    about = "GARCH-filtered dependence networks for stock panels"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel stages (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run every stage on a single thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic price panel (prices.csv, meta.csv).
    Simulate {
        /// Synthetic panel spec (TOML); defaults to a 3-market, 2-sector toy panel.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Assets per market-sector cell of the toy panel.
        #[arg(long, default_value_t = 4)]
        per_cell: usize,
        /// Returns per asset in the toy panel.
        #[arg(long, default_value_t = 750)]
        n_obs: usize,
    },
    /// Load prices, apply calendar and liquidity screens, compute returns and descriptive tables.
    Ingest {
        #[arg(long)]
        prices: Option<PathBuf>,
        #[arg(long)]
        volumes: Option<PathBuf>,
        #[arg(long)]
        meta: Option<PathBuf>,
    },
    /// Fit daily and weekly GARCH(1,1) models and write filtered returns.
    Fit,
    /// Estimate pairwise dependence p-values at both frequencies.
    Estimate,
    /// Correct daily p-values for non-synchronous trading.
    Correct,
    /// Build sector and country networks from corrected p-values.
    Network {
        /// Significance threshold for sector-level links.
        #[arg(long)]
        gamma: Option<f64>,
        /// Significance threshold for country-level links.
        #[arg(long)]
        country_gamma: Option<f64>,
        /// Also keep links with a negative slope.
        #[arg(long)]
        keep_negative: bool,
    },
    /// Repeat the analysis on overlapping windows.
    Rolling {
        #[arg(long)]
        length: Option<usize>,
        #[arg(long)]
        step: Option<usize>,
        #[arg(long)]
        tolerance: Option<usize>,
    },
    /// Collect every table and network export into `<out>/report`.
    Report,
    /// Print the resolved configuration as TOML.
    Config,
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if g.sequential {
        cfg.execution = Execution::Sequential;
    }
    match &cli.command {
        Command::Ingest { prices, volumes, meta } => {
            if prices.is_some() {
                cfg.input.prices = prices.clone();
            }
            if volumes.is_some() {
                cfg.input.volumes = volumes.clone();
            }
            if meta.is_some() {
                cfg.input.meta = meta.clone();
            }
        }
        Command::Network {
            gamma,
            country_gamma,
            keep_negative,
        } => {
            if let Some(x) = gamma {
                cfg.analysis.gamma = *x;
            }
            if let Some(x) = country_gamma {
                cfg.analysis.country_gamma = *x;
            }
            cfg.analysis.keep_negative |= keep_negative;
        }
        Command::Rolling {
            length,
            step,
            tolerance,
        } => {
            let w = &mut cfg.analysis.window;
            w.length = length.unwrap_or(w.length);
            w.step = step.unwrap_or(w.step);
            w.tolerance = tolerance.unwrap_or(w.tolerance);
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_workers(n: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    if n > 1 {
        log::warn!("built without the parallel feature; --workers {n} ignored");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<String> {
    let cfg = resolve_config(&cli)?;
    init_workers(cfg.workers)?;
    if matches!(cli.command, Command::Config) {
        return Ok(cfg.to_toml()?.trim_end().to_string());
    }
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let ctx = Ctx { cfg };
    match cli.command {
        Command::Simulate { spec, per_cell, n_obs } => stages::simulate(&ctx, &SimulateArgs { spec, per_cell, n_obs }),
        Command::Ingest { .. } => stages::ingest(&ctx),
        Command::Fit => stages::fit(&ctx),
        Command::Estimate => stages::estimate(&ctx),
        Command::Correct => stages::correct(&ctx),
        Command::Network { .. } => stages::network(&ctx),
        Command::Rolling { .. } => stages::rolling(&ctx),
        Command::Report => stages::report(&ctx),
        Command::Config => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
