use super::{expect_legs, Cursor, Leg, PositionBook, Side, Size, StepOutput, Strategy, StrategyError, TradeIntent};

/// Spot grid: buys as price falls through levels `anchor - k*spacing`
/// (k = 1..=levels) and sells each lot once price climbs one spacing above
/// its level. Level k trades in slot k.
#[derive(Debug, Clone)]
pub struct Grid {
    spacing: f64,
    levels: usize,
    anchor: Option<f64>,
    cycle_active: bool,
    prev_close: Option<f64>,
    cursor: Cursor,
}

impl Grid {
    pub fn new(spacing: f64, levels: usize, anchor: Option<f64>) -> Result<Self, StrategyError> {
        if !(spacing.is_finite() && spacing > 0.0) || levels == 0 {
            return Err(StrategyError::InvalidConfig("grid needs spacing > 0 and levels >= 1".into()));
        }
        Ok(Self { spacing, levels, anchor, cycle_active: false, prev_close: None, cursor: Cursor::default() })
    }

    pub fn anchor(&self) -> Option<f64> {
        self.anchor
    }

    pub fn level_price(&self, k: usize) -> Option<f64> {
        Some(self.anchor? - k as f64 * self.spacing)
    }
}

impl Strategy for Grid {
    fn warmup(&self) -> usize {
        2
    }

    fn step(&mut self, legs: &[Leg<'_>], book: &dyn PositionBook) -> Result<StepOutput, StrategyError> {
        expect_legs(legs, 1)?;
        let leg = legs[0];
        let new = self.cursor.advance(leg.bars.len())?;
        if new.is_empty() {
            return Ok(StepOutput::default());
        }
        // consume everything but the newest bar silently
        if new.len() > 1 {
            self.prev_close = Some(leg.bars[new.end - 2].close);
        }
        let close = leg.bars[new.end - 1].close;
        let prev = self.prev_close.replace(close);
        let anchor = *self.anchor.get_or_insert(close);
        let Some(prev) = prev else {
            return Ok(StepOutput::warming_up());
        };

        let filled: Vec<bool> = (1..=self.levels).map(|k| book.lot(leg.symbol, k as u32).is_some()).collect();
        let any_filled = filled.iter().any(|f| *f);
        if any_filled {
            self.cycle_active = true;
        } else if self.cycle_active {
            self.cycle_active = false;
            self.anchor = Some(close);
            return Ok(StepOutput::default());
        }

        let mut out = StepOutput::default();
        let free = filled.iter().filter(|f| !**f).count();
        for (k, is_filled) in (1..=self.levels).zip(&filled) {
            let level = anchor - k as f64 * self.spacing;
            if !is_filled && prev > level && close <= level {
                out.opens.push(
                    TradeIntent::new(
                        Side::OpenLong,
                        leg.symbol,
                        Size::Fraction(1.0 / free as f64),
                        format!("grid-entry-L{k}"),
                    )
                    .with_slot(k as u32),
                );
            }
            let exit = level + self.spacing;
            if *is_filled && prev < exit && close >= exit {
                out.closes.push(
                    TradeIntent::new(Side::CloseLong, leg.symbol, Size::Fraction(1.0), format!("grid-exit-L{k}"))
                        .with_slot(k as u32),
                );
            }
        }
        Ok(out)
    }
}
