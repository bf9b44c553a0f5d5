use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{expect_legs, Cursor, Leg, PositionBook, Side, Size, StepOutput, Strategy, StrategyError, TradeIntent};
use crate::market_data::{Candle, CandleSeries};

/// Rolling standard deviations at or below this are treated as a degenerate spread.
pub const DEGENERATE_STD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairAction {
    /// Spread below its mean: A is cheap relative to B.
    LongAShortB,
    /// Spread above its mean: A is rich relative to B.
    ShortALongB,
    Exit,
}

/// Rolling z-score of the log-price spread `ln(a) - ln(b)` with threshold logic.
#[derive(Debug, Clone)]
pub struct PairsDetector {
    lookback: usize,
    z_in: f64,
    z_out: f64,
    window: VecDeque<f64>,
    prev_z: Option<f64>,
}

impl PairsDetector {
    pub fn new(lookback: usize, z_in: f64, z_out: f64) -> Result<Self, StrategyError> {
        if lookback < 2 {
            return Err(StrategyError::InvalidConfig("pairs lookback must be >= 2".into()));
        }
        if !(z_in.is_finite() && z_out.is_finite() && 0.0 <= z_out && z_out < z_in) {
            return Err(StrategyError::InvalidConfig("pairs thresholds need 0 <= z_out < z_in".into()));
        }
        Ok(Self { lookback, z_in, z_out, window: VecDeque::with_capacity(lookback + 1), prev_z: None })
    }

    /// Z-score of the newest spread against the window ending at it; `None`
    /// during warm-up or when the window has (numerically) zero spread.
    fn push(&mut self, a: f64, b: f64) -> Option<f64> {
        let spread = a.ln() - b.ln();
        self.window.push_back(spread);
        if self.window.len() > self.lookback {
            self.window.pop_front();
        }
        if self.window.len() < self.lookback {
            return None;
        }
        let n = self.lookback as f64;
        let mean = self.window.iter().sum::<f64>() / n;
        let var = self.window.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        (std > DEGENERATE_STD).then(|| (spread - mean) / std)
    }

    /// Consumes one aligned bar pair. `in_position` says whether a spread trade is open.
    pub fn update(&mut self, a: &Candle, b: &Candle, in_position: bool) -> Option<PairAction> {
        let z = self.push(a.close, b.close);
        let prev = std::mem::replace(&mut self.prev_z, z);
        let z = z?;
        if in_position {
            return (z.abs() < self.z_out).then_some(PairAction::Exit);
        }
        let prev = prev?;
        if prev.abs() <= self.z_in && z.abs() > self.z_in {
            Some(if z > 0.0 { PairAction::ShortALongB } else { PairAction::LongAShortB })
        } else {
            None
        }
    }
}

/// Entry/exit signals for a pair of aligned series.
pub fn pairs_signals(
    series_a: &CandleSeries,
    series_b: &CandleSeries,
    lookback: usize,
    z_in: f64,
    z_out: f64,
) -> Result<Vec<(usize, PairAction)>, StrategyError> {
    check_pair(series_a.candles(), series_b.candles())?;
    let mut det = PairsDetector::new(lookback, z_in, z_out)?;
    let mut in_position = false;
    let mut out = Vec::new();
    for (i, (a, b)) in series_a.candles().iter().zip(series_b.candles()).enumerate() {
        if let Some(action) = det.update(a, b, in_position) {
            in_position = action != PairAction::Exit;
            out.push((i, action));
        }
    }
    Ok(out)
}

fn check_pair(a: &[Candle], b: &[Candle]) -> Result<(), StrategyError> {
    if a.len() != b.len() {
        return Err(StrategyError::MisalignedSeries(a.len().min(b.len())));
    }
    match a.iter().zip(b).position(|(x, y)| x.timestamp != y.timestamp) {
        Some(i) => Err(StrategyError::MisalignedSeries(i)),
        None => Ok(()),
    }
}

/// Market-neutral pairs trade: half the capital per leg, short the rich leg.
#[derive(Debug, Clone)]
pub struct PairsTrading {
    detector: PairsDetector,
    cursor: Cursor,
}

impl PairsTrading {
    pub fn new(lookback: usize, z_in: f64, z_out: f64) -> Result<Self, StrategyError> {
        Ok(Self { detector: PairsDetector::new(lookback, z_in, z_out)?, cursor: Cursor::default() })
    }
}

impl Strategy for PairsTrading {
    fn legs(&self) -> usize {
        2
    }

    fn warmup(&self) -> usize {
        self.detector.lookback + 1
    }

    fn needs_margin(&self) -> bool {
        true
    }

    fn step(&mut self, legs: &[Leg<'_>], book: &dyn PositionBook) -> Result<StepOutput, StrategyError> {
        expect_legs(legs, 2)?;
        let (a, b) = (legs[0], legs[1]);
        check_pair(a.bars, b.bars)?;
        let held_a = book.lot(a.symbol, 0);
        let held_b = book.lot(b.symbol, 0);
        let in_position = held_a.is_some() || held_b.is_some();
        let mut action = None;
        for i in self.cursor.advance(a.bars.len())? {
            action = self.detector.update(&a.bars[i], &b.bars[i], in_position);
        }
        if a.bars.len() < self.warmup() {
            return Ok(StepOutput::warming_up());
        }
        let mut out = StepOutput::default();
        let half = Size::Fraction(0.5);
        match action {
            Some(PairAction::LongAShortB) => {
                out.opens.push(TradeIntent::new(Side::OpenLong, a.symbol, half, "pairs-long-a"));
                out.opens.push(TradeIntent::new(Side::OpenShort, b.symbol, half, "pairs-short-b"));
            }
            Some(PairAction::ShortALongB) => {
                out.opens.push(TradeIntent::new(Side::OpenShort, a.symbol, half, "pairs-short-a"));
                out.opens.push(TradeIntent::new(Side::OpenLong, b.symbol, half, "pairs-long-b"));
            }
            Some(PairAction::Exit) => {
                for (leg, lot) in [(a, held_a), (b, held_b)] {
                    if let Some(lot) = lot {
                        let side = match lot.side {
                            super::PositionSide::Long => Side::CloseLong,
                            super::PositionSide::Short => Side::CloseShort,
                        };
                        out.closes.push(TradeIntent::new(side, leg.symbol, Size::Fraction(1.0), "pairs-exit"));
                    }
                }
            }
            None => {}
        }
        Ok(out)
    }
}
