use serde::{Deserialize, Serialize};

use super::{expect_legs, Cursor, Leg, PositionBook, Side, Size, StepOutput, Strategy, StrategyError, TradeIntent};
use crate::indicators::streams::Ema;
use crate::indicators::IndicatorSpec;
use crate::market_data::Candle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossDirection {
    Buy,
    Sell,
}

/// Detects strict crossings of a short-period EMA over a long-period EMA.
#[derive(Debug, Clone)]
pub struct CrossDetector {
    short: Ema,
    long: Ema,
    prev: Option<(f64, f64)>,
}

impl CrossDetector {
    pub fn new(p_short: usize, p_long: usize) -> Result<Self, StrategyError> {
        if p_short == 0 || p_short >= p_long {
            return Err(StrategyError::InvalidPeriods { short: p_short, long: p_long });
        }
        Ok(Self { short: Ema::new(p_short), long: Ema::new(p_long), prev: None })
    }

    pub fn update(&mut self, bar: &Candle) -> Option<CrossDirection> {
        let s = self.short.update(bar);
        let l = self.long.update(bar);
        let (s, l) = (s?, l?);
        let prev = self.prev.replace((s, l));
        let (ps, pl) = prev?;
        if s > l && ps <= pl {
            Some(CrossDirection::Buy)
        } else if s < l && ps >= pl {
            Some(CrossDirection::Sell)
        } else {
            None
        }
    }
}

/// Bar indices where the short EMA crosses the long EMA.
pub fn ema_crossover_signals(
    candles: &[Candle],
    p_short: usize,
    p_long: usize,
) -> Result<Vec<(usize, CrossDirection)>, StrategyError> {
    let mut det = CrossDetector::new(p_short, p_long)?;
    Ok(candles.iter().enumerate().filter_map(|(i, c)| det.update(c).map(|d| (i, d))).collect())
}

/// Long-only trend follower: buy on an upward EMA cross, exit on the downward one.
#[derive(Debug, Clone)]
pub struct EmaCross {
    p_short: usize,
    p_long: usize,
    detector: CrossDetector,
    cursor: Cursor,
    last: Option<CrossDirection>,
}

impl EmaCross {
    pub fn new(p_short: usize, p_long: usize) -> Result<Self, StrategyError> {
        Ok(Self {
            p_short,
            p_long,
            detector: CrossDetector::new(p_short, p_long)?,
            cursor: Cursor::default(),
            last: None,
        })
    }
}

impl Strategy for EmaCross {
    fn warmup(&self) -> usize {
        // a crossing needs two consecutive defined long-EMA values
        self.p_long + 1
    }

    fn overlays(&self) -> Vec<IndicatorSpec> {
        vec![IndicatorSpec::Ema { period: self.p_short }, IndicatorSpec::Ema { period: self.p_long }]
    }

    fn step(&mut self, legs: &[Leg<'_>], book: &dyn PositionBook) -> Result<StepOutput, StrategyError> {
        expect_legs(legs, 1)?;
        let leg = legs[0];
        self.last = None;
        for i in self.cursor.advance(leg.bars.len())? {
            self.last = self.detector.update(&leg.bars[i]);
        }
        if leg.bars.len() < self.warmup() {
            return Ok(StepOutput::warming_up());
        }
        let mut out = StepOutput::default();
        let holding = book.lot(leg.symbol, 0).is_some();
        match self.last {
            Some(CrossDirection::Buy) if !holding => {
                out.opens.push(TradeIntent::new(Side::OpenLong, leg.symbol, Size::Fraction(1.0), "ema-cross-up"));
            }
            Some(CrossDirection::Sell) if holding => {
                out.closes.push(TradeIntent::new(Side::CloseLong, leg.symbol, Size::Fraction(1.0), "ema-cross-down"));
            }
            _ => {}
        }
        Ok(out)
    }
}
