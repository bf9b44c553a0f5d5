//! Technical-analysis indicators over candle runs.
//!
//! Trend: [`sma`], [`ema`], [`macd`], [`adx`], [`kst`]. Oscillators: [`rsi`],
//! [`cci`], [`williams_r`], [`momentum`]. Volume: [`obv`], [`force_index`],
//! [`mfi`], [`vpvr`]. Volatility: [`atr`], [`bollinger`].
//!
//! Every output is index-aligned with its input and carries an explicit
//! warm-up prefix of `None` values; there are no interior holes.

mod spec;
pub mod streams;

use serde::Serialize;
use thiserror::Error;

use crate::market_data::Candle;

pub use spec::{Column, IndicatorSpec, IndicatorStream};
pub use streams::{Bands, MacdPoint, VolumeProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndicatorError {
    #[error("period must be at least {min}, got {got}")]
    InvalidPeriod { got: usize, min: usize },
    #[error("need more than {warmup} bars, series has {len}")]
    PeriodExceedsSeries { warmup: usize, len: usize },
    #[error("invalid periods: {0}")]
    InvalidPeriods(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unknown indicator `{0}`")]
    UnknownIndicator(String),
    #[error("series is empty")]
    EmptySeries,
}

/// Per-bar values of one indicator line; `values[i]` is `None` exactly for `i < warmup`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndicatorOutput {
    pub values: Vec<Option<f64>>,
    pub warmup: usize,
}

impl IndicatorOutput {
    /// Wraps a value column, deriving `warmup` from the first defined entry.
    pub fn from_values(values: Vec<Option<f64>>) -> Self {
        let warmup = values.iter().position(Option::is_some).unwrap_or(values.len());
        debug_assert!(values[warmup..].iter().all(Option::is_some), "interior hole in indicator output");
        Self { values, warmup }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.values.get(i).copied().flatten()
    }

    /// The defined suffix.
    pub fn defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.values[self.warmup..].iter().map(|v| v.unwrap_or(f64::NAN))
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied().flatten()
    }
}

pub(crate) fn check_period(period: usize, min: usize) -> Result<(), IndicatorError> {
    if period < min {
        Err(IndicatorError::InvalidPeriod { got: period, min })
    } else {
        Ok(())
    }
}

fn check_len(len: usize, warmup: usize) -> Result<(), IndicatorError> {
    if len == 0 {
        Err(IndicatorError::EmptySeries)
    } else if warmup >= len {
        Err(IndicatorError::PeriodExceedsSeries { warmup, len })
    } else {
        Ok(())
    }
}

fn drive<F>(candles: &[Candle], warmup: usize, mut step: F) -> Result<IndicatorOutput, IndicatorError>
where
    F: FnMut(&Candle) -> Option<f64>,
{
    check_len(candles.len(), warmup)?;
    let values: Vec<Option<f64>> = candles.iter().map(&mut step).collect();
    debug_assert_eq!(values.iter().position(Option::is_some), Some(warmup));
    Ok(IndicatorOutput { values, warmup })
}

pub fn sma(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::Sma::new(period);
    drive(candles, period - 1, |c| s.update(c))
}

pub fn ema(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::Ema::new(period);
    drive(candles, period - 1, |c| s.update(c))
}

pub fn rsi(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::Rsi::new(period);
    drive(candles, period, |c| s.update(c))
}

pub fn atr(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::Atr::new(period);
    drive(candles, period, |c| s.update(c))
}

/// MACD line, signal line and histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MacdOutput {
    pub macd: IndicatorOutput,
    pub signal: IndicatorOutput,
    pub histogram: IndicatorOutput,
}

pub fn macd(candles: &[Candle], fast: usize, slow: usize, signal: usize) -> Result<MacdOutput, IndicatorError> {
    check_period(fast, 1)?;
    check_period(signal, 1)?;
    if fast >= slow {
        return Err(IndicatorError::InvalidPeriods(format!("fast {fast} must be < slow {slow}")));
    }
    check_len(candles.len(), slow + signal - 2)?;
    let mut s = streams::Macd::new(fast, slow, signal);
    let points: Vec<Option<MacdPoint>> = candles.iter().map(|c| s.update(c)).collect();
    Ok(MacdOutput {
        macd: IndicatorOutput::from_values(points.iter().map(|p| p.map(|p| p.macd)).collect()),
        signal: IndicatorOutput::from_values(points.iter().map(|p| p.and_then(|p| p.signal)).collect()),
        histogram: IndicatorOutput::from_values(points.iter().map(|p| p.and_then(|p| p.histogram)).collect()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BollingerOutput {
    pub upper: IndicatorOutput,
    pub middle: IndicatorOutput,
    pub lower: IndicatorOutput,
}

pub fn bollinger(candles: &[Candle], period: usize, k: f64) -> Result<BollingerOutput, IndicatorError> {
    check_period(period, 2)?;
    if !(k.is_finite() && k > 0.0) {
        return Err(IndicatorError::InvalidParam(format!("band multiplier must be positive, got {k}")));
    }
    check_len(candles.len(), period - 1)?;
    let mut s = streams::Bollinger::new(period, k);
    let bands: Vec<Option<Bands>> = candles.iter().map(|c| s.update(c)).collect();
    let line = |f: fn(&Bands) -> f64| IndicatorOutput::from_values(bands.iter().map(|b| b.as_ref().map(f)).collect());
    Ok(BollingerOutput { upper: line(|b| b.upper), middle: line(|b| b.middle), lower: line(|b| b.lower) })
}

pub fn obv(candles: &[Candle]) -> Result<IndicatorOutput, IndicatorError> {
    let mut s = streams::Obv::new();
    drive(candles, 0, |c| s.update(c))
}

pub fn momentum(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::Momentum::new(period);
    drive(candles, period, |c| s.update(c))
}

pub fn force_index(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::ForceIndex::new(period);
    drive(candles, period, |c| s.update(c))
}

pub fn mfi(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::Mfi::new(period);
    drive(candles, period, |c| s.update(c))
}

pub fn cci(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::Cci::new(period);
    drive(candles, period - 1, |c| s.update(c))
}

pub fn williams_r(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::WilliamsR::new(period);
    drive(candles, period - 1, |c| s.update(c))
}

pub fn adx(candles: &[Candle], period: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    let mut s = streams::Adx::new(period);
    drive(candles, 2 * period - 1, |c| s.update(c))
}

pub fn kst(candles: &[Candle]) -> Result<IndicatorOutput, IndicatorError> {
    let mut s = streams::Kst::new();
    drive(candles, streams::Kst::warmup(), |c| s.update(c))
}

/// Rolling point of control of a `buckets`-bin volume profile over `period` bars.
pub fn vpvr(candles: &[Candle], period: usize, buckets: usize) -> Result<IndicatorOutput, IndicatorError> {
    check_period(period, 1)?;
    if buckets == 0 {
        return Err(IndicatorError::InvalidParam("bucket count must be at least 1".into()));
    }
    let mut s = streams::Vpvr::new(period, buckets);
    drive(candles, period - 1, |c| s.update(c))
}

/// Computes every output line of `spec` over `candles`.
pub fn compute(spec: &IndicatorSpec, candles: &[Candle]) -> Result<Vec<Column>, IndicatorError> {
    spec.compute(candles)
}
