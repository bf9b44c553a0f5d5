use std::path::PathBuf;

use cognitrade::backtest::BacktestError;
use cognitrade::broker::BrokerError;
use cognitrade::evolution::EvolutionError;
use cognitrade::indicators::IndicatorError;
use cognitrade::market_data::DataError;
use cognitrade::strategy::StrategyError;
use thiserror::Error;

/// Exit code for bad input: config, arguments or data.
pub const EXIT_VALIDATION: u8 = 1;
/// Exit code for failures while producing outputs.
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("invalid arguments: {0}")]
    Arguments(String),
    #[error("no backtest report at {0}; run `backtest` first")]
    MissingReport(PathBuf),
    #[error("malformed report {path}: {source}")]
    MalformedReport {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Broker(#[from] BrokerError),
}

impl CliError {
    /// Missing inputs are validation errors; other I/O failures are runtime errors.
    pub fn exit_code(&self) -> u8 {
        let io_code = |e: &std::io::Error| {
            if e.kind() == std::io::ErrorKind::NotFound {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            }
        };
        match self {
            CliError::Io { .. }
            | CliError::Broker(BrokerError::NotInitialized | BrokerError::SessionClosed | BrokerError::NoCurrentBar) => {
                EXIT_RUNTIME
            }
            CliError::Data(DataError::Io { source, .. }) | CliError::Evolution(EvolutionError::Io { source, .. }) => {
                io_code(source)
            }
            _ => EXIT_VALIDATION,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
