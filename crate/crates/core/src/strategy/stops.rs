use serde::{Deserialize, Serialize};

use super::{LotInfo, PositionSide, Side, Size, StrategyError, TradeIntent};
use crate::market_data::Candle;

pub const STOP_LOSS: &str = "stop-loss";
pub const TAKE_PROFIT: &str = "take-profit";

/// ATR-scaled trailing stop and take-profit. The percentage fallbacks apply
/// while the ATR is still warming up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StopConfig {
    pub atr_period: usize,
    pub sl_mult: f64,
    pub tp_mult: f64,
    pub fallback_sl_pct: f64,
    pub fallback_tp_pct: f64,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self { atr_period: 14, sl_mult: 2.0, tp_mult: 3.0, fallback_sl_pct: 0.05, fallback_tp_pct: 0.10 }
    }
}

impl StopConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let positive = [self.sl_mult, self.tp_mult, self.fallback_sl_pct, self.fallback_tp_pct]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if self.atr_period == 0 || !positive || self.fallback_sl_pct >= 1.0 {
            return Err(StrategyError::InvalidConfig(
                "stops need atr_period >= 1, positive multipliers and 0 < fallback_sl_pct < 1".into(),
            ));
        }
        Ok(())
    }
}

/// Stop state for one open lot. Created unarmed; the first call to
/// [`apply_stops`] (the entry bar) fixes the take-profit level.
#[derive(Debug, Clone, PartialEq)]
pub struct TrailingStop {
    pub symbol: String,
    pub slot: u32,
    stop: Option<f64>,
    take_profit: Option<f64>,
}

impl TrailingStop {
    pub fn new(symbol: impl Into<String>, slot: u32) -> Self {
        Self { symbol: symbol.into(), slot, stop: None, take_profit: None }
    }

    /// Current stop level, `None` before the first bar.
    pub fn stop_level(&self) -> Option<f64> {
        self.stop
    }

    pub fn take_profit_level(&self) -> Option<f64> {
        self.take_profit
    }
}

/// Checks `bar` against the levels built from earlier bars, then folds `bar`
/// into the trailing stop. Returns a full close of the lot on a breach.
pub fn apply_stops(
    state: &mut TrailingStop,
    lot: &LotInfo,
    bar: &Candle,
    atr: Option<f64>,
    config: &StopConfig,
) -> Option<TradeIntent> {
    let close = bar.close;
    let long = lot.side == PositionSide::Long;
    let breach = match (state.stop, state.take_profit) {
        (Some(stop), Some(tp)) if long => {
            if close < stop {
                Some(STOP_LOSS)
            } else if close > tp {
                Some(TAKE_PROFIT)
            } else {
                None
            }
        }
        (Some(stop), Some(tp)) => {
            if close > stop {
                Some(STOP_LOSS)
            } else if close < tp {
                Some(TAKE_PROFIT)
            } else {
                None
            }
        }
        _ => None,
    };

    let dir = if long { 1.0 } else { -1.0 };
    let candidate = match atr {
        Some(a) => close - dir * config.sl_mult * a,
        None => close * (1.0 - dir * config.fallback_sl_pct),
    };
    state.stop = Some(match state.stop {
        Some(s) if long => s.max(candidate),
        Some(s) => s.min(candidate),
        None => candidate,
    });
    if state.take_profit.is_none() {
        state.take_profit = Some(match atr {
            Some(a) => lot.entry_price + dir * config.tp_mult * a,
            None => lot.entry_price * (1.0 + dir * config.fallback_tp_pct),
        });
    }

    breach.map(|reason| {
        let side = if long { Side::CloseLong } else { Side::CloseShort };
        TradeIntent::new(side, state.symbol.clone(), Size::Fraction(1.0), reason).with_slot(state.slot)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lot(side: PositionSide, entry: f64) -> LotInfo {
        LotInfo { side, quantity: 1.0, entry_price: entry, entry_bar: 0 }
    }

    fn bar(c: f64) -> Candle {
        Candle::flat(0, c, 1.0)
    }

    #[test]
    fn flat_price_never_stops() {
        let cfg = StopConfig::default();
        let mut st = TrailingStop::new("X", 0);
        let l = lot(PositionSide::Long, 100.0);
        for _ in 0..50 {
            assert!(apply_stops(&mut st, &l, &bar(100.0), Some(0.0), &cfg).is_none());
        }
    }

    #[test]
    fn trailing_stop_follows_the_peak() {
        let cfg = StopConfig { sl_mult: 2.0, tp_mult: 100.0, ..StopConfig::default() };
        let mut st = TrailingStop::new("X", 0);
        let l = lot(PositionSide::Long, 100.0);
        let mut levels = Vec::new();
        for c in [100.0, 103.0, 106.0, 105.0, 104.5] {
            assert!(apply_stops(&mut st, &l, &bar(c), Some(1.0), &cfg).is_none());
            levels.push(st.stop_level().unwrap());
        }
        assert!(levels.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(st.stop_level(), Some(104.0));
        let out = apply_stops(&mut st, &l, &bar(103.9), Some(1.0), &cfg).unwrap();
        assert_eq!((out.side, out.reason.as_str()), (Side::CloseLong, STOP_LOSS));
    }

    #[test]
    fn gap_to_target_takes_profit() {
        let cfg = StopConfig::default();
        let mut st = TrailingStop::new("X", 3);
        let l = lot(PositionSide::Long, 100.0);
        assert!(apply_stops(&mut st, &l, &bar(100.0), Some(1.0), &cfg).is_none());
        let out = apply_stops(&mut st, &l, &bar(110.0), Some(1.0), &cfg).unwrap();
        assert_eq!((out.reason.as_str(), out.slot), (TAKE_PROFIT, 3));
    }

    #[test]
    fn short_mirror_and_fallback() {
        let cfg = StopConfig::default();
        let mut st = TrailingStop::new("X", 0);
        let l = lot(PositionSide::Short, 100.0);
        assert!(apply_stops(&mut st, &l, &bar(100.0), None, &cfg).is_none());
        assert_eq!(st.stop_level(), Some(105.0));
        assert_eq!(st.take_profit_level(), Some(90.0));
        let out = apply_stops(&mut st, &l, &bar(105.5), None, &cfg).unwrap();
        assert_eq!((out.side, out.reason.as_str()), (Side::CloseShort, STOP_LOSS));
    }
}
