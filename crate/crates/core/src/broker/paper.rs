//! Paper trading: drives a strategy against a replaying broker. Intents are
//! sized locally against the lot book and routed as market orders.

use serde::{Deserialize, Serialize};

use crate::backtest::execution::{CostModel, Lot, LotBook, PendingView, Planned, Rejection};
use crate::backtest::{
    close_trade, compute_metrics, score, BacktestError, BacktestReport, BacktestSettings, EquityPoint, Fill, Order,
    OrderStatus, Trade, FORCE_CLOSE_REASON,
};
use crate::indicators::streams::Atr;
use crate::market_data::Candle;
use crate::strategy::{
    apply_stops, Leg, PositionSide, Side, Size, StopConfig, Strategy, StrategyConfig, TradeIntent, TrailingStop,
};

use super::{AckStatus, Broker, BrokerError, OrderRequest, OrderSide, RejectReason, Replay};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionOptions {
    /// Stop after this many bars, as if the feed dropped.
    pub max_bars: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenPosition {
    pub symbol: String,
    pub slot: u32,
    pub side: PositionSide,
    pub quantity: f64,
    pub entry_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub report: BacktestReport,
    /// The feed ended before its last bar; positions were left open.
    pub interrupted: bool,
    pub open_positions: Vec<OpenPosition>,
    pub bars_processed: usize,
}

/// Runs `config` bar by bar against `broker`. A full session produces the
/// same fills and equity as `run_backtest` over the broker's data.
pub fn paper_trade_loop<B: Broker + Replay>(
    config: &StrategyConfig,
    broker: &mut B,
    settings: &BacktestSettings,
    options: &SessionOptions,
) -> Result<SessionReport, BrokerError> {
    let mut strategy = config.build()?;
    paper_trade_strategy(strategy.as_mut(), config.stops.as_ref(), broker, settings, options)
}

/// Paper-trades an already-built strategy.
pub fn paper_trade_strategy<B: Broker + Replay>(
    strategy: &mut dyn Strategy,
    stops: Option<&StopConfig>,
    broker: &mut B,
    settings: &BacktestSettings,
    options: &SessionOptions,
) -> Result<SessionReport, BrokerError> {
    settings.validate()?;
    if let Some(s) = stops {
        s.validate()?;
    }
    let info = broker.init()?;
    let symbols = info.symbols;
    if symbols.len() != strategy.legs() {
        return Err(BacktestError::LegCount { expected: strategy.legs(), got: symbols.len() }.into());
    }
    let mut manager = OrderManager::new(symbols.clone(), settings, strategy.needs_margin(), stops.copied());
    let mut pending: Vec<usize> = Vec::new();
    let mut processed = 0;
    let mut interrupted = false;
    loop {
        if options.max_bars.is_some_and(|m| processed >= m) {
            interrupted = true;
            break;
        }
        if !broker.advance() {
            break;
        }
        let t = broker.current().ok_or(BrokerError::NoCurrentBar)?;
        let bars: Vec<Candle> = (0..symbols.len()).map(|i| *broker.history(i).last().expect("current bar")).collect();
        manager.fill_batch(broker, &pending, t, &bars)?;
        pending.clear();
        manager.mark(broker, &bars);
        let mut closing: Vec<(String, u32)> = Vec::new();
        for intent in manager.stop_intents(&bars) {
            closing.push((intent.symbol.clone(), intent.slot));
            pending.push(manager.queue(intent, t));
        }
        let legs: Vec<Leg<'_>> =
            symbols.iter().enumerate().map(|(i, s)| Leg { symbol: s, bars: broker.history(i) }).collect();
        let out = strategy.step(&legs, &PendingView { book: &manager.book, closing: &closing })?;
        for intent in out.closes.into_iter().chain(out.opens) {
            pending.push(manager.queue(intent, t));
        }
        processed += 1;
    }
    if processed == 0 {
        return Err(BacktestError::NoData.into());
    }
    let open_positions = if interrupted {
        manager.open_positions()
    } else {
        for id in pending {
            manager.reject(id, Rejection::EndOfData);
        }
        broker.finish();
        let t = processed - 1;
        let bars: Vec<Candle> = (0..symbols.len()).map(|i| *broker.history(i).last().expect("current bar")).collect();
        manager.force_close(broker, t, &bars)?;
        let summary = broker.close_session()?;
        if !summary.liquidations.is_empty() {
            log::warn!("broker flattened {} residual positions", summary.liquidations.len());
        }
        Vec::new()
    };
    Ok(SessionReport { report: manager.finish(), interrupted, open_positions, bars_processed: processed })
}

struct StopState {
    config: StopConfig,
    atr: Vec<Atr>,
    trails: Vec<TrailingStop>,
}

/// Order and lot bookkeeping on the strategy side of the broker.
struct OrderManager {
    symbols: Vec<String>,
    settings: BacktestSettings,
    costs: CostModel,
    margin: bool,
    fees_paid: f64,
    book: LotBook,
    orders: Vec<Order>,
    fills: Vec<Fill>,
    trades: Vec<Trade>,
    equity: Vec<EquityPoint>,
    stops: Option<StopState>,
}

impl OrderManager {
    fn new(symbols: Vec<String>, settings: &BacktestSettings, margin: bool, stops: Option<StopConfig>) -> Self {
        Self {
            settings: *settings,
            costs: settings.costs(),
            margin,
            fees_paid: 0.0,
            book: LotBook::default(),
            orders: Vec::new(),
            fills: Vec::new(),
            trades: Vec::new(),
            equity: Vec::new(),
            stops: stops.map(|config| StopState {
                atr: symbols.iter().map(|_| Atr::new(config.atr_period)).collect(),
                config,
                trails: Vec::new(),
            }),
            symbols,
        }
    }

    fn leg(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    fn queue(&mut self, intent: TradeIntent, t: usize) -> usize {
        let id = self.orders.len();
        self.orders.push(Order { id, intent, created_at_bar: t, status: OrderStatus::Pending, rejection: None });
        id
    }

    fn reject(&mut self, id: usize, why: Rejection) {
        log::debug!("order {id} rejected: {why}");
        self.orders[id].status = OrderStatus::Rejected;
        self.orders[id].rejection = Some(why);
    }

    fn fill_batch<B: Broker>(
        &mut self,
        broker: &mut B,
        pending: &[usize],
        t: usize,
        bars: &[Candle],
    ) -> Result<(), BrokerError> {
        let (closes, opens): (Vec<usize>, Vec<usize>) =
            pending.iter().partition(|&&id| !self.orders[id].intent.side.is_open());
        for id in closes {
            let cash = broker.account().cash;
            self.route(broker, id, t, bars, cash, false)?;
        }
        let ref_cash = broker.account().cash;
        for id in opens {
            self.route(broker, id, t, bars, ref_cash, false)?;
        }
        Ok(())
    }

    /// Sizes an order locally, sends it and books the execution.
    fn route<B: Broker>(
        &mut self,
        broker: &mut B,
        id: usize,
        t: usize,
        bars: &[Candle],
        ref_cash: f64,
        forced: bool,
    ) -> Result<(), BrokerError> {
        let intent = self.orders[id].intent.clone();
        let Some(leg) = self.leg(&intent.symbol) else {
            self.reject(id, Rejection::UnknownSymbol);
            return Ok(());
        };
        let base = if forced { bars[leg].close } else { bars[leg].open };
        let planned = match self.book.plan(&intent, base, ref_cash, &self.costs, self.margin) {
            Ok(p) => p,
            Err(why) => {
                self.reject(id, why);
                return Ok(());
            }
        };
        let request = OrderRequest::market(
            format!("order-{id}"),
            intent.symbol.as_str(),
            if planned.is_buy { OrderSide::Buy } else { OrderSide::Sell },
            intent.side.position_side(),
            planned.quantity,
        );
        let ack = broker.place_order(&request)?;
        let execution = match (ack.status, ack.fill) {
            (AckStatus::Accepted, Some(e)) => e,
            _ => {
                let why = match ack.reason {
                    Some(RejectReason::InsufficientFunds) => Rejection::InsufficientFunds,
                    Some(RejectReason::InsufficientPosition) => Rejection::NoPosition,
                    Some(RejectReason::ShortNotAllowed) => Rejection::ShortNotAllowed,
                    Some(RejectReason::InvalidQuantity) | None => Rejection::InvalidSize,
                };
                self.reject(id, why);
                return Ok(());
            }
        };
        let executed = Planned { price: execution.price, fee: execution.fee, quantity: execution.quantity, ..planned };
        self.orders[id].status = OrderStatus::Filled;
        self.fees_paid += execution.fee;
        let fill = Fill {
            order_id: id,
            bar: t,
            timestamp: execution.timestamp,
            symbol: intent.symbol.clone(),
            slot: intent.slot,
            side: intent.side,
            price: execution.price,
            quantity: execution.quantity,
            fee: execution.fee,
            forced,
        };
        self.fills.push(fill.clone());
        if intent.side.is_open() {
            let lot = Lot {
                side: intent.side.position_side(),
                quantity: executed.quantity,
                entry_price: executed.price,
                entry_bar: t,
                entry_fee: executed.fee,
                entry_fill: self.fills.len() - 1,
            };
            self.book.open(&intent.symbol, intent.slot, lot);
            if let Some(stops) = &mut self.stops {
                stops.trails.push(TrailingStop::new(intent.symbol.clone(), intent.slot));
            }
        } else {
            let before = self.book.reduce(&intent.symbol, intent.slot, &executed).expect("planned close has a lot");
            self.trades.push(close_trade(&before, &self.fills[before.entry_fill], fill, &executed));
            if executed.closes_lot {
                if let Some(stops) = &mut self.stops {
                    stops.trails.retain(|s| !(s.symbol == intent.symbol && s.slot == intent.slot));
                }
            }
        }
        Ok(())
    }

    fn mark<B: Broker>(&mut self, broker: &B, bars: &[Candle]) {
        let cash = broker.account().cash;
        let exposure: f64 = self
            .book
            .iter()
            .map(|(sym, _, lot)| lot.signed_quantity() * bars[self.leg(sym).expect("known symbol")].close)
            .sum();
        self.equity.push(EquityPoint { timestamp: bars[0].timestamp, cash, equity: cash + exposure });
    }

    fn stop_intents(&mut self, bars: &[Candle]) -> Vec<TradeIntent> {
        let Some(stops) = &mut self.stops else {
            return Vec::new();
        };
        let atr: Vec<Option<f64>> = stops.atr.iter_mut().zip(bars).map(|(a, b)| a.update(b)).collect();
        let mut out = Vec::new();
        for trail in &mut stops.trails {
            let leg = self.symbols.iter().position(|s| *s == trail.symbol).expect("known symbol");
            let lot = self.book.get(&trail.symbol, trail.slot).expect("trail tracks an open lot").info();
            if let Some(intent) = apply_stops(trail, &lot, &bars[leg], atr[leg], &stops.config) {
                out.push(intent);
            }
        }
        out
    }

    /// Closes every lot at the last close, then re-marks the last bar.
    fn force_close<B: Broker>(&mut self, broker: &mut B, t: usize, bars: &[Candle]) -> Result<(), BrokerError> {
        let lots: Vec<(String, u32, PositionSide)> =
            self.book.iter().map(|(s, k, l)| (s.to_string(), k, l.side)).collect();
        if lots.is_empty() {
            return Ok(());
        }
        for (symbol, slot, side) in lots {
            let close_side = match side {
                PositionSide::Long => Side::CloseLong,
                PositionSide::Short => Side::CloseShort,
            };
            let intent =
                TradeIntent::new(close_side, symbol.as_str(), Size::Fraction(1.0), FORCE_CLOSE_REASON).with_slot(slot);
            let id = self.queue(intent, t);
            let cash = broker.account().cash;
            self.route(broker, id, t, bars, cash, true)?;
        }
        self.equity.pop();
        self.mark(broker, bars);
        Ok(())
    }

    fn open_positions(&self) -> Vec<OpenPosition> {
        self.book
            .iter()
            .map(|(s, slot, lot)| OpenPosition {
                symbol: s.to_string(),
                slot,
                side: lot.side,
                quantity: lot.quantity,
                entry_price: lot.entry_price,
            })
            .collect()
    }

    fn finish(self) -> BacktestReport {
        let curve: Vec<f64> = self.equity.iter().map(|p| p.equity).collect();
        let metrics = compute_metrics(&curve, &self.trades);
        BacktestReport {
            symbols: self.symbols,
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
