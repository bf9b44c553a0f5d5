use serde::{Deserialize, Serialize};

use super::StrategyError;
use crate::indicators::streams::{Adx, Ema};
use crate::market_data::Candle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Bullish,
    Bearish,
    Sideways,
}

/// Per-bar regime from EMA ordering, gated by trend strength (ADX).
pub fn trend_identify(
    candles: &[Candle],
    p_short: usize,
    p_long: usize,
    adx_period: usize,
    adx_min: f64,
) -> Result<Vec<Trend>, StrategyError> {
    if p_short == 0 || p_short >= p_long {
        return Err(StrategyError::InvalidPeriods { short: p_short, long: p_long });
    }
    if adx_period == 0 || !adx_min.is_finite() {
        return Err(StrategyError::InvalidConfig("trend needs adx period >= 1 and finite threshold".into()));
    }
    let (mut short, mut long, mut adx) = (Ema::new(p_short), Ema::new(p_long), Adx::new(adx_period));
    Ok(candles
        .iter()
        .map(|c| match (short.update(c), long.update(c), adx.update(c)) {
            (Some(s), Some(l), Some(a)) if a >= adx_min && s > l => Trend::Bullish,
            (Some(s), Some(l), Some(a)) if a >= adx_min && s < l => Trend::Bearish,
            _ => Trend::Sideways,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_is_sideways() {
        let bars: Vec<Candle> = (0..100).map(|i| Candle::flat(i, 7.0, 1.0)).collect();
        assert!(trend_identify(&bars, 9, 21, 14, 20.0).unwrap().iter().all(|t| *t == Trend::Sideways));
    }

    #[test]
    fn ramp_turns_bullish_after_warmup() {
        let bars: Vec<Candle> = (0..100)
            .map(|i| {
                let c = 10.0 + i as f64;
                Candle::new(i, c - 0.5, c + 0.2, c - 0.7, c, 1.0)
            })
            .collect();
        let t = trend_identify(&bars, 9, 21, 14, 20.0).unwrap();
        assert!(t[..26].iter().all(|x| *x == Trend::Sideways));
        assert!(t[30..].iter().all(|x| *x == Trend::Bullish));
    }

    #[test]
    fn rejects_inverted_periods() {
        assert!(trend_identify(&[], 21, 9, 14, 20.0).is_err());
    }
}
