//! Fill pricing, sizing and lot bookkeeping shared by the backtester and the
//! paper-trading order manager.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::strategy::{LotInfo, PositionBook, PositionSide, Side, Size, TradeIntent};

/// Relative slack allowed when a buy spends (almost) all available cash.
const FUNDS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostModel {
    /// Proportional fee on traded notional.
    pub fee_rate: f64,
    /// Adverse slippage in basis points.
    pub slippage_bps: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { fee_rate: 0.001, slippage_bps: 5.0 }
    }
}

impl CostModel {
    pub const ZERO: CostModel = CostModel { fee_rate: 0.0, slippage_bps: 0.0 };

    pub fn is_valid(&self) -> bool {
        self.fee_rate.is_finite() && self.fee_rate >= 0.0 && self.slippage_bps.is_finite() && self.slippage_bps >= 0.0
    }

    /// Execution price for a market order against reference price `base`.
    pub fn fill_price(&self, base: f64, is_buy: bool) -> f64 {
        let s = self.slippage_bps / 10_000.0;
        if is_buy {
            base * (1.0 + s)
        } else {
            base * (1.0 - s)
        }
    }

    pub fn fee(&self, price: f64, quantity: f64) -> f64 {
        self.fee_rate * price * quantity
    }

    /// Quantity whose notional plus fee equals `budget`.
    pub fn affordable_quantity(&self, budget: f64, price: f64) -> f64 {
        budget / (price * (1.0 + self.fee_rate))
    }
}

/// Signed cash change of a fill.
pub fn cash_delta(is_buy: bool, price: f64, quantity: f64, fee: f64) -> f64 {
    if is_buy {
        -(price * quantity) - fee
    } else {
        price * quantity - fee
    }
}

/// Whether `cash` covers a buy costing `cost`. Returns the cash left, with
/// rounding residue below the slack clamped to zero.
pub fn spend(cash: f64, cost: f64) -> Option<f64> {
    if cost <= cash {
        Some(cash - cost)
    } else if cost <= cash + FUNDS_SLACK * cash.abs().max(1.0) {
        Some(0.0)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    InsufficientFunds,
    NoPosition,
    SlotOccupied,
    ShortNotAllowed,
    InvalidSize,
    UnknownSymbol,
    EndOfData,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rejection::InsufficientFunds => "insufficient funds",
            Rejection::NoPosition => "no matching open position",
            Rejection::SlotOccupied => "slot already holds a position",
            Rejection::ShortNotAllowed => "short selling disabled in spot mode",
            Rejection::InvalidSize => "invalid size",
            Rejection::UnknownSymbol => "unknown symbol",
            Rejection::EndOfData => "no bar left to fill at",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lot {
    pub side: PositionSide,
    pub quantity: f64,
    pub entry_price: f64,
    pub entry_bar: usize,
    /// Fee paid on entry, pro-rated as the lot is partially closed.
    pub entry_fee: f64,
    /// Index of the opening fill in the run's fill list.
    pub entry_fill: usize,
}

impl Lot {
    pub fn info(&self) -> LotInfo {
        LotInfo { side: self.side, quantity: self.quantity, entry_price: self.entry_price, entry_bar: self.entry_bar }
    }

    /// Signed exposure: negative for shorts.
    pub fn signed_quantity(&self) -> f64 {
        match self.side {
            PositionSide::Long => self.quantity,
            PositionSide::Short => -self.quantity,
        }
    }
}

/// What executing an intent would do, before funds are checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Planned {
    pub is_buy: bool,
    pub price: f64,
    pub quantity: f64,
    pub fee: f64,
    /// True when the whole lot goes away.
    pub closes_lot: bool,
}

/// Open lots keyed by symbol then slot.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LotBook {
    lots: BTreeMap<String, BTreeMap<u32, Lot>>,
}

impl LotBook {
    pub fn get(&self, symbol: &str, slot: u32) -> Option<&Lot> {
        self.lots.get(symbol)?.get(&slot)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32, &Lot)> {
        self.lots.iter().flat_map(|(s, m)| m.iter().map(move |(k, l)| (s.as_str(), *k, l)))
    }

    pub fn is_empty(&self) -> bool {
        self.lots.values().all(BTreeMap::is_empty)
    }

    /// Net signed quantity per symbol.
    pub fn net_positions(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (s, _, lot) in self.iter() {
            *out.entry(s.to_string()).or_insert(0.0) += lot.signed_quantity();
        }
        out.retain(|_, q| *q != 0.0);
        out
    }

    /// Sizes and prices `intent` against reference price `base`. `ref_cash`
    /// is the cash that fractional opens are taken of.
    pub fn plan(
        &self,
        intent: &TradeIntent,
        base: f64,
        ref_cash: f64,
        costs: &CostModel,
        margin: bool,
    ) -> Result<Planned, Rejection> {
        if !intent.size.is_valid() {
            return Err(Rejection::InvalidSize);
        }
        let is_buy = intent.side.is_buy();
        let price = costs.fill_price(base, is_buy);
        if intent.side.is_open() {
            if intent.side == Side::OpenShort && !margin {
                return Err(Rejection::ShortNotAllowed);
            }
            if self.get(&intent.symbol, intent.slot).is_some() {
                return Err(Rejection::SlotOccupied);
            }
            let quantity = match intent.size {
                Size::Fraction(f) => {
                    if ref_cash.is_nan() || ref_cash <= 0.0 {
                        return Err(Rejection::InsufficientFunds);
                    }
                    costs.affordable_quantity(f * ref_cash, price)
                }
                Size::Quantity(q) => q,
            };
            if !(quantity.is_finite() && quantity > 0.0) {
                return Err(Rejection::InvalidSize);
            }
            Ok(Planned { is_buy, price, quantity, fee: costs.fee(price, quantity), closes_lot: false })
        } else {
            let lot = self.get(&intent.symbol, intent.slot).ok_or(Rejection::NoPosition)?;
            if lot.side != intent.side.position_side() {
                return Err(Rejection::NoPosition);
            }
            let (quantity, closes_lot) = match intent.size {
                Size::Fraction(f) if f >= 1.0 => (lot.quantity, true),
                Size::Fraction(f) => (lot.quantity * f, false),
                Size::Quantity(q) if q > lot.quantity => return Err(Rejection::InvalidSize),
                Size::Quantity(q) => (q, q == lot.quantity),
            };
            Ok(Planned { is_buy, price, quantity, fee: costs.fee(price, quantity), closes_lot })
        }
    }

    pub fn open(&mut self, symbol: &str, slot: u32, lot: Lot) {
        self.lots.entry(symbol.to_string()).or_default().insert(slot, lot);
    }

    /// Reduces a lot by `planned`; returns the lot as it was before the close.
    pub fn reduce(&mut self, symbol: &str, slot: u32, planned: &Planned) -> Option<Lot> {
        let slots = self.lots.get_mut(symbol)?;
        let lot = slots.get_mut(&slot)?;
        let before = lot.clone();
        if planned.closes_lot {
            slots.remove(&slot);
            if slots.is_empty() {
                self.lots.remove(symbol);
            }
        } else {
            let remaining = lot.quantity - planned.quantity;
            lot.entry_fee *= remaining / lot.quantity;
            lot.quantity = remaining;
        }
        Some(before)
    }
}

/// Book view that hides lots already scheduled for closing.
pub struct PendingView<'a> {
    pub book: &'a LotBook,
    pub closing: &'a [(String, u32)],
}

impl PositionBook for PendingView<'_> {
    fn lot(&self, symbol: &str, slot: u32) -> Option<LotInfo> {
        if self.closing.iter().any(|(s, k)| s == symbol && *k == slot) {
            return None;
        }
        self.book.get(symbol, slot).map(Lot::info)
    }
}

/// Profit of a round trip on fill prices, in percent of the entry price.
pub fn round_trip_pct(side: PositionSide, entry: f64, exit: f64) -> f64 {
    match side {
        PositionSide::Long => (exit - entry) / entry * 100.0,
        PositionSide::Short => (entry - exit) / entry * 100.0,
    }
}
