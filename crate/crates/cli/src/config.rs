//! Run configuration, read from one TOML file.
//!
//! Relative paths in the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use cognitrade::backtest::BacktestSettings;
use cognitrade::evolution::{EvolutionConfig, SearchSpace};
use cognitrade::indicators::IndicatorSpec;
use cognitrade::strategy::{StrategyConfig, StrategyKind};
use serde::{Deserialize, Deserializer};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default = "StrategyConfig::hold")]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub costs: BacktestSettings,
    #[serde(default)]
    pub indicators: IndicatorSection,
    #[serde(default)]
    pub optimize: Option<OptimizeSection>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub warehouse: PathBuf,
    /// One symbol per strategy leg; a plain string is accepted for one leg.
    #[serde(alias = "symbol", deserialize_with = "one_or_many")]
    pub symbols: Vec<String>,
    /// Bar interval in seconds.
    pub interval: u64,
    /// Inclusive window bounds in epoch milliseconds.
    #[serde(default)]
    pub from: Option<i64>,
    #[serde(default)]
    pub to: Option<i64>,
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(String),
        Many(Vec<String>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(s) => vec![s],
        OneOrMany::Many(v) => v,
    })
}

/// Indicators for the `indicator` command and the report overlays.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatorSection {
    #[serde(default, deserialize_with = "specs")]
    pub specs: Vec<IndicatorSpec>,
}

fn specs<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<IndicatorSpec>, D::Error> {
    let raw = Vec::<String>::deserialize(d)?;
    raw.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OptimizeMode {
    Tune,
    Evolve,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub mode: OptimizeMode,
    #[serde(default)]
    pub tune: Option<SearchSpace>,
    #[serde(default)]
    pub evolve: Option<EvolveSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSection {
    /// Indicator columns fed to the network.
    #[serde(deserialize_with = "specs")]
    pub inputs: Vec<IndicatorSpec>,
    #[serde(default)]
    pub neat: EvolutionConfig,
}

/// Rejects `[strategy]` keys that the parsed config does not serialize back.
fn reject_unknown_strategy_keys(text: &str, parsed: &StrategyConfig) -> std::result::Result<(), String> {
    let raw: toml::Table = toml::from_str(text).map_err(|e| e.to_string())?;
    let Some(toml::Value::Table(section)) = raw.get("strategy") else { return Ok(()) };
    let known = serde_json::to_value(parsed).map_err(|e| e.to_string())?;
    match section.keys().find(|k| known.get(k.as_str()).is_none()) {
        Some(k) => Err(format!("unknown key `{k}` in [strategy]")),
        None => Ok(()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config { path: path.into(), reason: e.to_string() })?;
        reject_unknown_strategy_keys(text, &cfg.strategy)
            .map_err(|reason| CliError::Config { path: path.into(), reason })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Config { path: path.into(), reason: e.to_string() })?;
        Self::from_toml(&text, path)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.data.warehouse);
        resolve(&mut self.out);
        if let StrategyKind::Network { genome_file } = &mut self.strategy.kind {
            resolve(genome_file);
        }
    }

    /// Checks every section before any command runs.
    pub fn validate(&self, path: &Path) -> Result<()> {
        let bad = |reason: String| CliError::Config { path: path.into(), reason };
        if self.data.symbols.len() != self.strategy.legs() {
            return Err(bad(format!(
                "strategy needs {} symbol(s), data lists {}",
                self.strategy.legs(),
                self.data.symbols.len()
            )));
        }
        if self.data.interval == 0 {
            return Err(bad("data.interval must be positive".into()));
        }
        if let (Some(f), Some(t)) = (self.data.from, self.data.to) {
            if f > t {
                return Err(bad(format!("data.from {f} is after data.to {t}")));
            }
        }
        self.strategy.validate()?;
        self.costs.validate()?;
        for spec in &self.indicators.specs {
            spec.validate()?;
        }
        if let Some(opt) = &self.optimize {
            if let Some(ev) = &opt.evolve {
                ev.neat.validate()?;
                for spec in &ev.inputs {
                    spec.validate()?;
                }
            }
            match opt.mode {
                OptimizeMode::Tune if opt.tune.is_none() => {
                    return Err(bad("optimize.mode = \"tune\" needs an [optimize.tune] section".into()))
                }
                OptimizeMode::Evolve if opt.evolve.is_none() => {
                    return Err(bad("optimize.mode = \"evolve\" needs an [optimize.evolve] section".into()))
                }
                _ => {}
            }
        }
        Ok(())
    }
}
