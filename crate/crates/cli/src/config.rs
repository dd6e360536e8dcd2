//! Pipeline configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use comove::market::{FilterRules, StatsConfig};
use comove::rolling::AnalysisConfig;
use comove::{Country, Execution};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputPaths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prices: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volumes: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Liquidity {
    pub reference_countries: Vec<Country>,
    pub max_consecutive_inactive: usize,
    pub max_inactive_fraction: f64,
}

impl Default for Liquidity {
    fn default() -> Self {
        let r = FilterRules::default();
        Liquidity {
            reference_countries: r.reference_countries,
            max_consecutive_inactive: r.max_consecutive_inactive,
            max_inactive_fraction: r.max_inactive_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads for data-parallel stages; 0 lets the runtime decide.
    pub workers: usize,
    pub execution: Execution,
    /// Markets with daily price limits (no tail exponent reported).
    pub capped_markets: Vec<Country>,
    pub hill_fraction: f64,
    pub input: InputPaths,
    pub liquidity: Liquidity,
    pub analysis: AnalysisConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            out_dir: PathBuf::from("out"),
            seed: 42,
            workers: 0,
            execution: Execution::Parallel,
            capped_markets: StatsConfig::default().capped_countries,
            hill_fraction: StatsConfig::default().hill_fraction,
            input: InputPaths::default(),
            liquidity: Liquidity::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = toml::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        PipelineConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.analysis;
        for (name, g) in [("gamma", a.gamma), ("country_gamma", a.country_gamma)] {
            if !(g > 0.0 && g < 1.0) {
                bail!("{name} must lie in (0, 1), got {g}");
            }
        }
        if a.window.length == 0 || a.window.step == 0 {
            bail!("window length and step must be positive");
        }
        if !(0.0..=1.0).contains(&self.liquidity.max_inactive_fraction) {
            bail!("max_inactive_fraction must lie in [0, 1]");
        }
        if !(self.hill_fraction > 0.0 && self.hill_fraction < 1.0) {
            bail!("hill_fraction must lie in (0, 1)");
        }
        if a.min_sector_size == 0 {
            bail!("min_sector_size must be at least 1");
        }
        Ok(())
    }

    pub fn filter_rules(&self) -> FilterRules {
        FilterRules {
            reference_countries: self.liquidity.reference_countries.clone(),
            max_consecutive_inactive: self.liquidity.max_consecutive_inactive,
            max_inactive_fraction: self.liquidity.max_inactive_fraction,
            ..FilterRules::default()
        }
    }

    pub fn stats_config(&self) -> StatsConfig {
        StatsConfig {
            hill_fraction: self.hill_fraction,
            capped_countries: self.capped_markets.clone(),
            exec: self.execution,
            ..StatsConfig::default()
        }
    }
}
