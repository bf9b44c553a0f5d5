//! Bar-by-bar backtester.
//!
//! Per bar: fill the orders queued on the previous bar at this bar's open
//! (closes before opens), mark positions at the close, run the stop
//! component, step the strategy and queue its intents. Whatever is still open
//! after the last bar is force-closed at that bar's close.

pub mod execution;
mod metrics;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::indicators::streams::Atr;
use crate::market_data::{check_aligned, CandleSeries, DataError};
use crate::strategy::{
    apply_stops, Leg, PositionSide, Side, Size, StopConfig, Strategy, StrategyConfig, StrategyError, TradeIntent,
    TrailingStop,
};
use execution::{cash_delta, round_trip_pct, spend, CostModel, Lot, LotBook, PendingView, Planned, Rejection};

pub use metrics::{compute_metrics, score, Metrics, DEFAULT_DRAWDOWN_PENALTY};

pub const FORCE_CLOSE_REASON: &str = "force-close";

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("invalid backtest settings: {0}")]
    InvalidSettings(String),
    #[error("no data to backtest")]
    NoData,
    #[error("strategy needs {expected} series, got {got}")]
    LegCount { expected: usize, got: usize },
    #[error("series {0} has gaps; backtests need contiguous data")]
    Gapped(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSettings {
    pub initial_cash: f64,
    pub fee_rate: f64,
    pub slippage_bps: f64,
    /// Weight of max drawdown in the score.
    pub drawdown_penalty: f64,
}

impl Default for BacktestSettings {
    fn default() -> Self {
        let c = CostModel::default();
        Self {
            initial_cash: 10_000.0,
            fee_rate: c.fee_rate,
            slippage_bps: c.slippage_bps,
            drawdown_penalty: DEFAULT_DRAWDOWN_PENALTY,
        }
    }
}

impl BacktestSettings {
    pub fn costs(&self) -> CostModel {
        CostModel { fee_rate: self.fee_rate, slippage_bps: self.slippage_bps }
    }

    pub fn frictionless(initial_cash: f64) -> Self {
        Self { initial_cash, fee_rate: 0.0, slippage_bps: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), BacktestError> {
        if !(self.initial_cash.is_finite() && self.initial_cash > 0.0) {
            return Err(BacktestError::InvalidSettings("initial cash must be > 0".into()));
        }
        if !self.costs().is_valid() {
            return Err(BacktestError::InvalidSettings("fee and slippage must be finite and >= 0".into()));
        }
        if !(self.drawdown_penalty.is_finite() && self.drawdown_penalty >= 0.0) {
            return Err(BacktestError::InvalidSettings("drawdown penalty must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderStatus {
    Pending,
    Filled,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    pub id: usize,
    pub intent: TradeIntent,
    pub created_at_bar: usize,
    pub status: OrderStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection: Option<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub order_id: usize,
    pub bar: usize,
    pub timestamp: i64,
    pub symbol: String,
    pub slot: u32,
    pub side: Side,
    pub price: f64,
    pub quantity: f64,
    pub fee: f64,
    /// Produced by the end-of-data liquidation.
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub symbol: String,
    pub slot: u32,
    pub side: PositionSide,
    pub entry: Fill,
    pub exit: Fill,
    /// Quantity closed by `exit` (may be part of the entry quantity).
    pub quantity: f64,
    /// Price move from entry to exit fill, in percent, before fees.
    pub profit_pct: f64,
    /// Quote-currency result net of both fees.
    pub pnl: f64,
    pub forced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquityPoint {
    pub timestamp: i64,
    pub cash: f64,
    pub equity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub symbols: Vec<String>,
    pub settings: BacktestSettings,
    pub margin: bool,
    pub orders: Vec<Order>,
    pub fills: Vec<Fill>,
    pub trades: Vec<Trade>,
    pub equity: Vec<EquityPoint>,
    pub fees_paid: f64,
    pub metrics: Metrics,
    pub score: f64,
}

impl BacktestReport {
    pub fn equity_values(&self) -> Vec<f64> {
        self.equity.iter().map(|p| p.equity).collect()
    }

    pub fn final_equity(&self) -> f64 {
        self.metrics.final_equity
    }
}

/// Builds the configured strategy and backtests it.
pub fn run_backtest(
    config: &StrategyConfig,
    data: &[CandleSeries],
    settings: &BacktestSettings,
) -> Result<BacktestReport, BacktestError> {
    let mut strategy = config.build()?;
    run_strategy(strategy.as_mut(), config.stops.as_ref(), data, settings)
}

/// Checks the inputs shared by every execution loop.
pub fn check_inputs(
    strategy: &dyn Strategy,
    data: &[CandleSeries],
    settings: &BacktestSettings,
) -> Result<(), BacktestError> {
    settings.validate()?;
    if data.is_empty() || data[0].is_empty() {
        return Err(BacktestError::NoData);
    }
    if data.len() != strategy.legs() {
        return Err(BacktestError::LegCount { expected: strategy.legs(), got: data.len() });
    }
    if let Some(s) = data.iter().find(|s| s.is_gapped()) {
        return Err(BacktestError::Gapped(s.symbol().to_string()));
    }
    check_aligned(&data.iter().collect::<Vec<_>>())?;
    Ok(())
}

/// Backtests an already-built strategy.
pub fn run_strategy(
    strategy: &mut dyn Strategy,
    stops: Option<&StopConfig>,
    data: &[CandleSeries],
    settings: &BacktestSettings,
) -> Result<BacktestReport, BacktestError> {
    check_inputs(strategy, data, settings)?;
    if let Some(s) = stops {
        s.validate()?;
    }
    let mut engine = Engine::new(data, settings, strategy.needs_margin(), stops.copied());
    let n = data[0].len();
    let mut pending: Vec<usize> = Vec::new();
    for t in 0..n {
        engine.fill_batch(&pending, t);
        pending.clear();
        engine.mark(t);
        let mut closing: Vec<(String, u32)> = Vec::new();
        for intent in engine.stop_intents(t) {
            closing.push((intent.symbol.clone(), intent.slot));
            pending.push(engine.queue(intent, t));
        }
        let legs: Vec<Leg<'_>> = data.iter().map(|s| Leg { symbol: s.symbol(), bars: &s.candles()[..=t] }).collect();
        let out = strategy.step(&legs, &PendingView { book: &engine.book, closing: &closing })?;
        for intent in out.closes.into_iter().chain(out.opens) {
            pending.push(engine.queue(intent, t));
        }
    }
    for id in pending {
        engine.reject(id, Rejection::EndOfData);
    }
    engine.force_close(n - 1);
    Ok(engine.finish())
}

struct StopState {
    config: StopConfig,
    atr: Vec<Atr>,
    trails: Vec<TrailingStop>,
}

struct Engine<'a> {
    data: &'a [CandleSeries],
    settings: BacktestSettings,
    costs: CostModel,
    margin: bool,
    cash: f64,
    fees_paid: f64,
    book: LotBook,
    orders: Vec<Order>,
    fills: Vec<Fill>,
    trades: Vec<Trade>,
    equity: Vec<EquityPoint>,
    stops: Option<StopState>,
}

impl<'a> Engine<'a> {
    fn new(data: &'a [CandleSeries], settings: &BacktestSettings, margin: bool, stops: Option<StopConfig>) -> Self {
        Self {
            data,
            settings: *settings,
            costs: settings.costs(),
            margin,
            cash: settings.initial_cash,
            fees_paid: 0.0,
            book: LotBook::default(),
            orders: Vec::new(),
            fills: Vec::new(),
            trades: Vec::new(),
            equity: Vec::with_capacity(data[0].len()),
            stops: stops.map(|config| StopState {
                atr: data.iter().map(|_| Atr::new(config.atr_period)).collect(),
                config,
                trails: Vec::new(),
            }),
        }
    }

    fn leg_index(&self, symbol: &str) -> Option<usize> {
        self.data.iter().position(|s| s.symbol() == symbol)
    }

    fn queue(&mut self, intent: TradeIntent, t: usize) -> usize {
        let id = self.orders.len();
        self.orders.push(Order { id, intent, created_at_bar: t, status: OrderStatus::Pending, rejection: None });
        id
    }

    fn reject(&mut self, id: usize, why: Rejection) {
        let order = &mut self.orders[id];
        log::debug!("order {id} rejected: {why}");
        order.status = OrderStatus::Rejected;
        order.rejection = Some(why);
    }

    fn fill_batch(&mut self, pending: &[usize], t: usize) {
        let (closes, opens): (Vec<usize>, Vec<usize>) =
            pending.iter().partition(|&&id| !self.orders[id].intent.side.is_open());
        for id in closes {
            self.execute(id, t);
        }
        let ref_cash = self.cash;
        for id in opens {
            self.execute_with(id, t, ref_cash);
        }
    }

    fn execute(&mut self, id: usize, t: usize) {
        self.execute_with(id, t, self.cash)
    }

    fn execute_with(&mut self, id: usize, t: usize, ref_cash: f64) {
        let intent = self.orders[id].intent.clone();
        let Some(leg) = self.leg_index(&intent.symbol) else {
            return self.reject(id, Rejection::UnknownSymbol);
        };
        let base = self.data[leg].candles()[t].open;
        match self.book.plan(&intent, base, ref_cash, &self.costs, self.margin) {
            Ok(p) => self.apply(id, t, &intent, p, false),
            Err(why) => self.reject(id, why),
        }
    }

    /// Applies a planned fill. Only opening buys are funds-checked; covering
    /// a short is always allowed.
    fn apply(&mut self, id: usize, t: usize, intent: &TradeIntent, p: Planned, forced: bool) {
        let new_cash = if intent.side == Side::OpenLong {
            match spend(self.cash, p.price * p.quantity + p.fee) {
                Some(c) => c,
                None => return self.reject(id, Rejection::InsufficientFunds),
            }
        } else {
            self.cash + cash_delta(p.is_buy, p.price, p.quantity, p.fee)
        };
        self.cash = new_cash;
        self.fees_paid += p.fee;
        self.orders[id].status = OrderStatus::Filled;
        let leg = self.leg_index(&intent.symbol).expect("symbol checked before planning");
        let fill = Fill {
            order_id: id,
            bar: t,
            timestamp: self.data[leg].candles()[t].timestamp,
            symbol: intent.symbol.clone(),
            slot: intent.slot,
            side: intent.side,
            price: p.price,
            quantity: p.quantity,
            fee: p.fee,
            forced,
        };
        self.fills.push(fill.clone());
        if intent.side.is_open() {
            let lot = Lot {
                side: intent.side.position_side(),
                quantity: p.quantity,
                entry_price: p.price,
                entry_bar: t,
                entry_fee: p.fee,
                entry_fill: self.fills.len() - 1,
            };
            self.book.open(&intent.symbol, intent.slot, lot);
            if let Some(stops) = &mut self.stops {
                stops.trails.push(TrailingStop::new(intent.symbol.clone(), intent.slot));
            }
        } else {
            let before = self.book.reduce(&intent.symbol, intent.slot, &p).expect("planned close has a lot");
            self.trades.push(close_trade(&before, &self.fills[before.entry_fill], fill, &p));
            if p.closes_lot {
                if let Some(stops) = &mut self.stops {
                    stops.trails.retain(|s| !(s.symbol == intent.symbol && s.slot == intent.slot));
                }
            }
        }
    }

    fn mark(&mut self, t: usize) {
        let equity = self.cash + self.exposure(t);
        let timestamp = self.data[0].candles()[t].timestamp;
        self.equity.push(EquityPoint { timestamp, cash: self.cash, equity });
    }

    fn exposure(&self, t: usize) -> f64 {
        self.book
            .iter()
            .map(|(sym, _, lot)| {
                let leg = self.leg_index(sym).expect("lots only exist for known symbols");
                lot.signed_quantity() * self.data[leg].candles()[t].close
            })
            .sum()
    }

    fn stop_intents(&mut self, t: usize) -> Vec<TradeIntent> {
        let Some(stops) = &mut self.stops else {
            return Vec::new();
        };
        let atr: Vec<Option<f64>> =
            stops.atr.iter_mut().zip(self.data).map(|(a, s)| a.update(&s.candles()[t])).collect();
        let mut out = Vec::new();
        for trail in &mut stops.trails {
            let leg = self.data.iter().position(|s| s.symbol() == trail.symbol).expect("known symbol");
            let lot = self.book.get(&trail.symbol, trail.slot).expect("trail tracks an open lot").info();
            if let Some(intent) = apply_stops(trail, &lot, &self.data[leg].candles()[t], atr[leg], &stops.config) {
                out.push(intent);
            }
        }
        out
    }

    /// Liquidates every lot at the bar's close and re-marks that bar.
    fn force_close(&mut self, t: usize) {
        let lots: Vec<(String, u32, PositionSide)> =
            self.book.iter().map(|(s, k, l)| (s.to_string(), k, l.side)).collect();
        if lots.is_empty() {
            return;
        }
        for (symbol, slot, side) in lots {
            let close_side = match side {
                PositionSide::Long => Side::CloseLong,
                PositionSide::Short => Side::CloseShort,
            };
            let intent =
                TradeIntent::new(close_side, symbol.as_str(), Size::Fraction(1.0), FORCE_CLOSE_REASON).with_slot(slot);
            let leg = self.leg_index(&symbol).expect("known symbol");
            let base = self.data[leg].candles()[t].close;
            let p = self.book.plan(&intent, base, self.cash, &self.costs, self.margin).expect("lot is open");
            let id = self.queue(intent.clone(), t);
            self.apply(id, t, &intent, p, true);
        }
        self.equity.pop();
        self.mark(t);
    }

    fn finish(self) -> BacktestReport {
        let curve: Vec<f64> = self.equity.iter().map(|p| p.equity).collect();
        let metrics = compute_metrics(&curve, &self.trades);
        BacktestReport {
            symbols: self.data.iter().map(|s| s.symbol().to_string()).collect(),
            settings: self.settings,
            margin: self.margin,
            orders: self.orders,
            fills: self.fills,
            trades: self.trades,
            equity: self.equity,
            fees_paid: self.fees_paid,
            score: score(&metrics, self.settings.drawdown_penalty),
            metrics,
        }
    }
}

/// Round-trip record for a (possibly partial) close of `lot`.
pub fn close_trade(lot: &Lot, entry: &Fill, exit: Fill, p: &Planned) -> Trade {
    let share = p.quantity / lot.quantity;
    let gross = match lot.side {
        PositionSide::Long => (p.price - lot.entry_price) * p.quantity,
        PositionSide::Short => (lot.entry_price - p.price) * p.quantity,
    };
    Trade {
        symbol: exit.symbol.clone(),
        slot: exit.slot,
        side: lot.side,
        entry: entry.clone(),
        quantity: p.quantity,
        profit_pct: round_trip_pct(lot.side, lot.entry_price, p.price),
        pnl: gross - lot.entry_fee * share - p.fee,
        forced: exit.forced,
        exit,
    }
}
