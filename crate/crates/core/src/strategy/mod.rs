//! Heuristic strategies.
//!
//! A strategy is stepped once per bar with the history up to and including
//! that bar and answers with two lists of intents: positions to open and
//! positions to close. Strategies keep their own incremental indicator state,
//! so each step only consumes the bars it has not seen yet.

mod ema_cross;
mod grid;
mod pairs;
mod stops;
mod trend;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::{IndicatorError, IndicatorSpec};
use crate::market_data::Candle;

pub use ema_cross::{ema_crossover_signals, CrossDetector, CrossDirection, EmaCross};
pub use grid::Grid;
pub use pairs::{pairs_signals, PairAction, PairsDetector, PairsTrading};
pub use stops::{apply_stops, StopConfig, TrailingStop};
pub use trend::{trend_identify, Trend};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("invalid strategy config: {0}")]
    InvalidConfig(String),
    #[error("invalid periods: short {short} must be < long {long}")]
    InvalidPeriods { short: usize, long: usize },
    #[error("strategy needs {expected} series, got {got}")]
    LegCount { expected: usize, got: usize },
    #[error("history shrank from {seen} to {got} bars; state does not match history")]
    HistoryRewound { seen: usize, got: usize },
    #[error("series are misaligned at bar {0}")]
    MisalignedSeries(usize),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error("cannot load network model: {0}")]
    Model(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    OpenLong,
    OpenShort,
    CloseLong,
    CloseShort,
}

impl Side {
    pub fn is_open(self) -> bool {
        matches!(self, Side::OpenLong | Side::OpenShort)
    }

    /// True when executing this intent buys the asset.
    pub fn is_buy(self) -> bool {
        matches!(self, Side::OpenLong | Side::CloseShort)
    }

    pub fn position_side(self) -> PositionSide {
        match self {
            Side::OpenLong | Side::CloseLong => PositionSide::Long,
            Side::OpenShort | Side::CloseShort => PositionSide::Short,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionSide {
    Long,
    Short,
}

/// How much to trade. For opens a fraction is taken of the cash available
/// when the bar's batch of opens is filled; for closes it is a fraction of the lot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Size {
    Fraction(f64),
    Quantity(f64),
}

impl Size {
    pub fn is_valid(&self) -> bool {
        match *self {
            Size::Fraction(f) => f.is_finite() && f > 0.0 && f <= 1.0,
            Size::Quantity(q) => q.is_finite() && q > 0.0,
        }
    }
}

/// One requested trade. `slot` distinguishes several lots of the same symbol
/// (grid levels); single-position strategies use slot 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeIntent {
    pub side: Side,
    pub symbol: String,
    pub size: Size,
    pub reason: String,
    #[serde(default)]
    pub slot: u32,
}

impl TradeIntent {
    pub fn new(side: Side, symbol: impl Into<String>, size: Size, reason: impl Into<String>) -> Self {
        Self { side, symbol: symbol.into(), size, reason: reason.into(), slot: 0 }
    }

    pub fn with_slot(mut self, slot: u32) -> Self {
        self.slot = slot;
        self
    }
}

/// An open lot as seen by a strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LotInfo {
    pub side: PositionSide,
    pub quantity: f64,
    pub entry_price: f64,
    pub entry_bar: usize,
}

/// Read-only view of the lots a strategy currently holds. Lots already
/// scheduled for closing are not reported.
pub trait PositionBook {
    fn lot(&self, symbol: &str, slot: u32) -> Option<LotInfo>;
}

/// A book with nothing open.
pub struct Flat;

impl PositionBook for Flat {
    fn lot(&self, _symbol: &str, _slot: u32) -> Option<LotInfo> {
        None
    }
}

/// History of one instrument up to and including the current bar.
#[derive(Debug, Clone, Copy)]
pub struct Leg<'a> {
    pub symbol: &'a str,
    pub bars: &'a [Candle],
}

/// The two lists of operations produced at each bar.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutput {
    pub opens: Vec<TradeIntent>,
    pub closes: Vec<TradeIntent>,
    /// Set while indicator warm-ups are unsatisfied; both lists are then empty.
    pub insufficient_history: bool,
}

impl StepOutput {
    pub fn warming_up() -> Self {
        Self { insufficient_history: true, ..Self::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.opens.is_empty() && self.closes.is_empty()
    }
}

pub trait Strategy: Send {
    /// Number of series the strategy consumes.
    fn legs(&self) -> usize {
        1
    }

    /// Bars that must exist before the first intent can be produced.
    fn warmup(&self) -> usize;

    /// Whether the strategy opens short positions.
    fn needs_margin(&self) -> bool {
        false
    }

    /// Indicators worth plotting alongside the price.
    fn overlays(&self) -> Vec<IndicatorSpec> {
        Vec::new()
    }

    fn step(&mut self, legs: &[Leg<'_>], book: &dyn PositionBook) -> Result<StepOutput, StrategyError>;
}

/// Tracks how many bars of each leg have been consumed.
#[derive(Debug, Clone, Default)]
pub(crate) struct Cursor {
    seen: usize,
}

impl Cursor {
    /// Returns the range of not-yet-seen bars and marks them seen.
    pub(crate) fn advance(&mut self, len: usize) -> Result<std::ops::Range<usize>, StrategyError> {
        if len < self.seen {
            return Err(StrategyError::HistoryRewound { seen: self.seen, got: len });
        }
        let range = self.seen..len;
        self.seen = len;
        Ok(range)
    }
}

pub(crate) fn expect_legs(legs: &[Leg<'_>], n: usize) -> Result<(), StrategyError> {
    if legs.len() != n {
        return Err(StrategyError::LegCount { expected: n, got: legs.len() });
    }
    Ok(())
}

/// Strategy that never trades.
#[derive(Debug, Clone, Default)]
pub struct Hold;

impl Strategy for Hold {
    fn warmup(&self) -> usize {
        0
    }

    fn step(&mut self, legs: &[Leg<'_>], _book: &dyn PositionBook) -> Result<StepOutput, StrategyError> {
        expect_legs(legs, 1)?;
        Ok(StepOutput::default())
    }
}

fn default_grid_levels() -> usize {
    5
}

/// Kind-specific strategy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Hold,
    EmaCross {
        p_short: usize,
        p_long: usize,
    },
    Grid {
        spacing: f64,
        #[serde(default = "default_grid_levels")]
        levels: usize,
        #[serde(default)]
        anchor: Option<f64>,
    },
    Pairs {
        lookback: usize,
        z_in: f64,
        z_out: f64,
    },
    /// A NEAT network stored in the line-oriented genome format.
    Network {
        genome_file: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    #[serde(flatten)]
    pub kind: StrategyKind,
    #[serde(default)]
    pub stops: Option<StopConfig>,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self { kind, stops: None }
    }

    pub fn hold() -> Self {
        Self::new(StrategyKind::Hold)
    }

    pub fn ema_cross(p_short: usize, p_long: usize) -> Self {
        Self::new(StrategyKind::EmaCross { p_short, p_long })
    }

    pub fn validate(&self) -> Result<(), StrategyError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(StrategyError::InvalidConfig(format!("{name} must be finite")))
            }
        };
        match &self.kind {
            StrategyKind::Hold | StrategyKind::Network { .. } => {}
            StrategyKind::EmaCross { p_short, p_long } => {
                if *p_short == 0 || p_short >= p_long {
                    return Err(StrategyError::InvalidPeriods { short: *p_short, long: *p_long });
                }
            }
            StrategyKind::Grid { spacing, levels, anchor } => {
                finite("spacing", *spacing)?;
                if *spacing <= 0.0 || *levels == 0 {
                    return Err(StrategyError::InvalidConfig("grid needs spacing > 0 and levels >= 1".into()));
                }
                if let Some(a) = anchor {
                    finite("anchor", *a)?;
                }
            }
            StrategyKind::Pairs { lookback, z_in, z_out } => {
                finite("z_in", *z_in)?;
                finite("z_out", *z_out)?;
                if *lookback < 2 {
                    return Err(StrategyError::InvalidConfig("pairs lookback must be >= 2".into()));
                }
                if !(0.0 <= *z_out && z_out < z_in) {
                    return Err(StrategyError::InvalidConfig("pairs thresholds need 0 <= z_out < z_in".into()));
                }
            }
        }
        if let Some(stops) = &self.stops {
            stops.validate()?;
        }
        Ok(())
    }

    /// Returns a copy with named numeric parameters overridden (used by the tuner).
    pub fn with_params(&self, params: &[(String, f64)]) -> Result<Self, StrategyError> {
        let mut value = serde_json::to_value(self).map_err(|e| StrategyError::InvalidConfig(e.to_string()))?;
        for (name, v) in params {
            let (target, key) = match name.strip_prefix("stops.") {
                Some(key) => (
                    value
                        .get_mut("stops")
                        .filter(|s| !s.is_null())
                        .ok_or_else(|| StrategyError::InvalidConfig(format!("`{name}` needs a stops section")))?,
                    key,
                ),
                None => (&mut value, name.as_str()),
            };
            let obj =
                target.as_object_mut().ok_or_else(|| StrategyError::InvalidConfig("config is not an object".into()))?;
            let slot =
                obj.get_mut(key).ok_or_else(|| StrategyError::InvalidConfig(format!("unknown parameter `{name}`")))?;
            *slot = if slot.is_u64() && v.fract() == 0.0 && *v >= 0.0 {
                serde_json::Value::from(*v as u64)
            } else {
                serde_json::Value::from(*v)
            };
        }
        let cfg: StrategyConfig =
            serde_json::from_value(value).map_err(|e| StrategyError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn build(&self) -> Result<Box<dyn Strategy>, StrategyError> {
        self.validate()?;
        Ok(match &self.kind {
            StrategyKind::Hold => Box::new(Hold),
            StrategyKind::EmaCross { p_short, p_long } => Box::new(EmaCross::new(*p_short, *p_long)?),
            StrategyKind::Grid { spacing, levels, anchor } => Box::new(Grid::new(*spacing, *levels, *anchor)?),
            StrategyKind::Pairs { lookback, z_in, z_out } => Box::new(PairsTrading::new(*lookback, *z_in, *z_out)?),
            StrategyKind::Network { genome_file } => {
                let model = crate::evolution::NetworkModel::load(genome_file)
                    .map_err(|e| StrategyError::Model(e.to_string()))?;
                Box::new(crate::evolution::NetworkStrategy::new(model)?)
            }
        })
    }

    pub fn legs(&self) -> usize {
        match self.kind {
            StrategyKind::Pairs { .. } => 2,
            _ => 1,
        }
    }
}

/// Drives a strategy over `bars` without any execution (every intent is
/// assumed unfilled) and returns the output at each bar.
pub fn replay_signals(
    strategy: &mut dyn Strategy,
    legs: &[(&str, &[Candle])],
) -> Result<Vec<StepOutput>, StrategyError> {
    let len = legs.first().map(|l| l.1.len()).unwrap_or(0);
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let view: Vec<Leg<'_>> = legs.iter().map(|(s, b)| Leg { symbol: s, bars: &b[..=t] }).collect();
        out.push(strategy.step(&view, &Flat)?);
    }
    Ok(out)
}
