//! Command-line core: loads a run configuration and sequences the data,
//! indicator, strategy, optimization and validation services.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use cognitrade::indicators::IndicatorSpec;

pub use config::{OptimizeMode, RunConfig};
pub use error::{CliError, Result, EXIT_RUNTIME, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(name = "cognitrade", version, about = "Indicator analysis, strategy tuning and backtesting")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a candle CSV and store it in the warehouse.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the first config symbol.
        #[arg(long)]
        symbol: Option<String>,
        /// Bar interval in seconds; defaults to the config interval.
        #[arg(long)]
        interval: Option<u64>,
        /// Defaults to the config warehouse.
        #[arg(long)]
        warehouse: Option<PathBuf>,
        #[arg(long)]
        allow_gaps: bool,
    },
    /// Compute indicator columns aligned with the stored candles.
    Indicator {
        /// `name:key=value,...`; repeatable. Defaults to the config list.
        #[arg(long = "spec")]
        specs: Vec<String>,
        #[arg(long)]
        symbol: Option<String>,
    },
    /// Backtest the configured strategy.
    Backtest {
        /// Route orders through the simulated broker instead of the backtest engine.
        #[arg(long)]
        paper: bool,
    },
    /// Tune strategy parameters or evolve a network strategy.
    Optimize {
        #[arg(long, value_enum)]
        mode: Option<OptimizeMode>,
    },
    /// Emit plot-ready CSVs from a backtest report.
    Report {
        /// Defaults to `<out>/report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

impl Cli {
    fn run_config(&self) -> Result<Option<RunConfig>> {
        let Some(path) = &self.config else { return Ok(None) };
        let mut cfg = RunConfig::load(path)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        Ok(Some(cfg))
    }

    fn require_config(&self) -> Result<RunConfig> {
        self.run_config()?.ok_or_else(|| CliError::Arguments("--config is required".into()))
    }
}

/// Runs one command and returns its stdout summary.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Ingest { input, symbol, interval, warehouse, allow_gaps } => {
            let cfg = cli.run_config()?;
            let missing = |what: &str| CliError::Arguments(format!("ingest needs --{what} or a config providing it"));
            let req = commands::IngestRequest {
                input: input.clone(),
                warehouse: warehouse
                    .clone()
                    .or_else(|| cfg.as_ref().map(|c| c.data.warehouse.clone()))
                    .ok_or_else(|| missing("warehouse"))?,
                symbol: symbol
                    .clone()
                    .or_else(|| cfg.as_ref().map(|c| c.data.symbols[0].clone()))
                    .ok_or_else(|| missing("symbol"))?,
                interval: interval.or(cfg.as_ref().map(|c| c.data.interval)).ok_or_else(|| missing("interval"))?,
                allow_gaps: *allow_gaps,
            };
            commands::ingest(&req)
        }
        Command::Indicator { specs, symbol } => {
            let cfg = cli.require_config()?;
            let specs = if specs.is_empty() {
                cfg.indicators.specs.clone()
            } else {
                specs.iter().map(|s| s.parse()).collect::<std::result::Result<Vec<IndicatorSpec>, _>>()?
            };
            commands::indicator(&cfg, &specs, symbol.as_deref())
        }
        Command::Backtest { paper } => commands::backtest(&cli.require_config()?, *paper),
        Command::Optimize { mode } => commands::optimize(&cli.require_config()?, *mode),
        Command::Report { report } => commands::report(&cli.require_config()?, report.as_deref()),
    }
}
