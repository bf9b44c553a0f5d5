//! A strategy that emits random intents, plus independent account checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cognitrade::backtest::BacktestReport;
use cognitrade::strategy::{Leg, PositionBook, Side, Size, StepOutput, Strategy, StrategyError, TradeIntent};
use cognitrade::CandleSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIDES: [Side; 4] = [Side::OpenLong, Side::CloseLong, Side::OpenShort, Side::CloseShort];

/// Emits random intents of every side, size kind and slot, including
/// oversized and unknown-symbol ones. Never reads the book.
pub struct RandomStrategy {
    rng: ChaCha8Rng,
    symbols: Vec<String>,
    margin: bool,
    rate: f64,
    /// (bar, index within the step's output) pairs to suppress.
    drop: BTreeSet<(usize, usize)>,
}

impl RandomStrategy {
    pub fn new(seed: u64, symbols: &[&str], margin: bool) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            symbols: symbols.iter().map(|s| s.to_string()).collect(),
            margin,
            rate: 0.2,
            drop: BTreeSet::new(),
        }
    }

    pub fn dropping(mut self, drop: BTreeSet<(usize, usize)>) -> Self {
        self.drop = drop;
        self
    }

    fn intent(&mut self) -> TradeIntent {
        let side = SIDES[self.rng.gen_range(0..4)];
        let symbol = if self.rng.gen_bool(0.03) {
            "UNKNOWN".to_string()
        } else {
            self.symbols[self.rng.gen_range(0..self.symbols.len())].clone()
        };
        let size = match self.rng.gen_range(0..4) {
            0 => Size::Fraction(1.0),
            1 => Size::Fraction(self.rng.gen_range(0.01..1.5)),
            2 => Size::Quantity(self.rng.gen_range(0.01..200.0)),
            _ => Size::Fraction(self.rng.gen_range(-0.2..0.3)),
        };
        TradeIntent::new(side, symbol, size, "fuzz").with_slot(self.rng.gen_range(0..3))
    }
}

impl Strategy for RandomStrategy {
    fn legs(&self) -> usize {
        self.symbols.len()
    }

    fn warmup(&self) -> usize {
        0
    }

    fn needs_margin(&self) -> bool {
        self.margin
    }

    fn step(&mut self, legs: &[Leg<'_>], _book: &dyn PositionBook) -> Result<StepOutput, StrategyError> {
        let t = legs[0].bars.len() - 1;
        let mut out = StepOutput::default();
        if !self.rng.gen_bool(self.rate) {
            return Ok(out);
        }
        let n = self.rng.gen_range(1..=3);
        let mut all: Vec<TradeIntent> = (0..n).map(|_| self.intent()).collect();
        // the engine queues closes before opens; index in that order
        all.sort_by_key(|i| i.side.is_open());
        for (k, intent) in all.into_iter().enumerate() {
            if self.drop.contains(&(t, k)) {
                continue;
            }
            if intent.side.is_open() {
                out.opens.push(intent);
            } else {
                out.closes.push(intent);
            }
        }
        Ok(out)
    }
}

/// Worst relative gap between each equity point and cash plus marked
/// positions rebuilt from the fills.
pub fn conservation_gap(report: &BacktestReport, data: &[CandleSeries], initial_cash: f64) -> f64 {
    let mut cash = initial_cash;
    let mut qty: BTreeMap<&str, f64> = BTreeMap::new();
    let mut fills = report.fills.iter().peekable();
    let mut worst: f64 = 0.0;
    for (t, point) in report.equity.iter().enumerate() {
        while let Some(f) = fills.peek() {
            if f.bar > t {
                break;
            }
            let buy = matches!(f.side, Side::OpenLong | Side::CloseShort);
            let signed = if buy { f.quantity } else { -f.quantity };
            cash += -signed * f.price - f.fee;
            *qty.entry(f.symbol.as_str()).or_insert(0.0) += signed;
            fills.next();
        }
        let marked: f64 = qty
            .iter()
            .map(|(s, q)| {
                let leg = data.iter().position(|d| d.symbol() == *s).unwrap();
                q * data[leg].candles()[t].close
            })
            .sum();
        let expected = cash + marked;
        let scale = expected.abs().max(point.equity.abs()).max(1.0);
        worst = worst.max((point.equity - expected).abs() / scale);
        worst = worst.max((point.cash - cash).abs() / cash.abs().max(1.0));
    }
    worst
}

/// Rejected orders keyed by (bar, index within that bar's output).
pub fn rejected_slots(report: &BacktestReport) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    let mut bar = usize::MAX;
    let mut k = 0;
    for o in report.orders.iter().filter(|o| o.intent.reason == "fuzz") {
        if o.created_at_bar != bar {
            bar = o.created_at_bar;
            k = 0;
        }
        if o.status == cognitrade::backtest::OrderStatus::Rejected {
            out.insert((bar, k));
        }
        k += 1;
    }
    out
}
