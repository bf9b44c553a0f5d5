//! Order routing to brokers, with a simulated exchange that replays candles.
//!
//! The simulator keeps hedge-mode positions: long and short exposure per
//! symbol are tracked separately, and every order names the position side it
//! acts on.

mod paper;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::execution::{cash_delta, spend, CostModel};
use crate::backtest::{BacktestError, BacktestSettings};
use crate::market_data::{check_aligned, Candle, CandleSeries, DataError};
use crate::strategy::{PositionSide, StrategyError};

pub use paper::{paper_trade_loop, paper_trade_strategy, OpenPosition, SessionOptions, SessionReport};

/// Relative tolerance when an order closes what is left of a position.
const POSITION_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("session not initialised")]
    NotInitialized,
    #[error("session already closed")]
    SessionClosed,
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("no bar is current; advance the feed first")]
    NoCurrentBar,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderSide {
    Buy,
    Sell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderType {
    Market,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRequest {
    pub client_id: String,
    pub symbol: String,
    pub side: OrderSide,
    /// Which exposure the order opens (same direction) or reduces.
    pub position_side: PositionSide,
    pub quantity: f64,
    pub order_type: OrderType,
}

impl OrderRequest {
    pub fn market(
        client_id: impl Into<String>,
        symbol: impl Into<String>,
        side: OrderSide,
        position_side: PositionSide,
        quantity: f64,
    ) -> Self {
        Self {
            client_id: client_id.into(),
            symbol: symbol.into(),
            side,
            position_side,
            quantity,
            order_type: OrderType::Market,
        }
    }

    fn opens(&self) -> bool {
        matches!(
            (self.side, self.position_side),
            (OrderSide::Buy, PositionSide::Long) | (OrderSide::Sell, PositionSide::Short)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AckStatus {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    InsufficientFunds,
    InsufficientPosition,
    ShortNotAllowed,
    InvalidQuantity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub bar: usize,
    pub timestamp: i64,
    pub price: f64,
    pub quantity: f64,
    pub fee: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderAck {
    pub client_id: String,
    pub broker_id: u64,
    pub status: AckStatus,
    pub fill: Option<Execution>,
    pub reason: Option<RejectReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountSnapshot {
    pub cash: f64,
    pub fees_paid: f64,
    /// Open exposure, sorted by symbol then side.
    pub positions: Vec<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub symbol: String,
    pub side: PositionSide,
    /// Always positive.
    pub quantity: f64,
}

impl AccountSnapshot {
    /// Cash plus signed exposure valued with `price`.
    pub fn equity(&self, price: impl Fn(&str) -> f64) -> f64 {
        self.cash
            + self
                .positions
                .iter()
                .map(|p| match p.side {
                    PositionSide::Long => p.quantity * price(&p.symbol),
                    PositionSide::Short => -p.quantity * price(&p.symbol),
                })
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolInfo {
    pub symbol: String,
    pub interval_secs: u64,
    pub fee_rate: f64,
    pub slippage_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub symbols: Vec<String>,
    pub margin: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub account: AccountSnapshot,
    /// Orders the broker sent itself to flatten leftover exposure.
    pub liquidations: Vec<OrderAck>,
}

/// The contract every broker adapter implements.
pub trait Broker {
    fn init(&mut self) -> Result<SessionInfo, BrokerError>;
    fn place_order(&mut self, request: &OrderRequest) -> Result<OrderAck, BrokerError>;
    fn account(&self) -> AccountSnapshot;
    fn symbol_info(&self, symbol: &str) -> Result<SymbolInfo, BrokerError>;
    fn close_session(&mut self) -> Result<SessionSummary, BrokerError>;
}

/// A market-data feed replayed bar by bar.
pub trait Replay {
    /// Moves to the next bar (quotes at its open). False once the feed is exhausted.
    fn advance(&mut self) -> bool;
    /// Moves the quote of the current bar to its close; no further bars follow.
    fn finish(&mut self);
    /// Index of the current bar.
    fn current(&self) -> Option<usize>;
    /// Bars of `leg` up to and including the current one.
    fn history(&self, leg: usize) -> &[Candle];
    fn symbols(&self) -> Vec<&str>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quote {
    Open,
    Close,
}

/// In-process exchange that fills market orders at the current quote.
#[derive(Debug, Clone)]
pub struct SimulatedBroker {
    feeds: Vec<CandleSeries>,
    costs: CostModel,
    margin: bool,
    cash: f64,
    fees_paid: f64,
    positions: BTreeMap<(String, PositionSide), f64>,
    acks: BTreeMap<String, OrderAck>,
    next_id: u64,
    bar: Option<usize>,
    quote: Quote,
    initialized: bool,
    closed: bool,
}

impl SimulatedBroker {
    pub fn new(feeds: Vec<CandleSeries>, settings: &BacktestSettings) -> Result<Self, BrokerError> {
        settings.validate()?;
        if let Some(s) = feeds.iter().find(|s| s.is_gapped()) {
            return Err(BacktestError::Gapped(s.symbol().to_string()).into());
        }
        check_aligned(&feeds.iter().collect::<Vec<_>>())?;
        Ok(Self {
            feeds,
            costs: settings.costs(),
            margin: true,
            cash: settings.initial_cash,
            fees_paid: 0.0,
            positions: BTreeMap::new(),
            acks: BTreeMap::new(),
            next_id: 0,
            bar: None,
            quote: Quote::Open,
            initialized: false,
            closed: false,
        })
    }

    /// Disallows short exposure.
    pub fn spot_only(mut self) -> Self {
        self.margin = false;
        self
    }

    pub fn feeds(&self) -> &[CandleSeries] {
        &self.feeds
    }

    fn leg(&self, symbol: &str) -> Option<usize> {
        self.feeds.iter().position(|s| s.symbol() == symbol)
    }

    fn reject(&mut self, req: &OrderRequest, reason: RejectReason) -> OrderAck {
        log::debug!("broker rejected {}: {reason:?}", req.client_id);
        self.ack(req, AckStatus::Rejected, None, Some(reason))
    }

    fn ack(
        &mut self,
        req: &OrderRequest,
        status: AckStatus,
        fill: Option<Execution>,
        reason: Option<RejectReason>,
    ) -> OrderAck {
        let ack = OrderAck { client_id: req.client_id.clone(), broker_id: self.next_id, status, fill, reason };
        self.next_id += 1;
        self.acks.insert(req.client_id.clone(), ack.clone());
        ack
    }

    fn execute(&mut self, req: &OrderRequest) -> Result<OrderAck, BrokerError> {
        let leg = self.leg(&req.symbol).ok_or_else(|| BrokerError::UnknownSymbol(req.symbol.clone()))?;
        let t = self.bar.ok_or(BrokerError::NoCurrentBar)?;
        if !(req.quantity.is_finite() && req.quantity > 0.0) {
            return Ok(self.reject(req, RejectReason::InvalidQuantity));
        }
        let bar = self.feeds[leg].candles()[t];
        let is_buy = req.side == OrderSide::Buy;
        let base = if self.quote == Quote::Open { bar.open } else { bar.close };
        let price = self.costs.fill_price(base, is_buy);
        let fee = self.costs.fee(price, req.quantity);
        let key = (req.symbol.clone(), req.position_side);
        let held = self.positions.get(&key).copied().unwrap_or(0.0);
        if req.opens() {
            if req.position_side == PositionSide::Short && !self.margin {
                return Ok(self.reject(req, RejectReason::ShortNotAllowed));
            }
            if is_buy {
                match spend(self.cash, price * req.quantity + fee) {
                    Some(c) => self.cash = c,
                    None => return Ok(self.reject(req, RejectReason::InsufficientFunds)),
                }
            } else {
                self.cash += cash_delta(false, price, req.quantity, fee);
            }
            self.positions.insert(key, held + req.quantity);
        } else {
            if req.quantity > held + POSITION_SLACK * held.max(1.0) {
                return Ok(self.reject(req, RejectReason::InsufficientPosition));
            }
            self.cash += cash_delta(is_buy, price, req.quantity, fee);
            let left = held - req.quantity;
            if left <= POSITION_SLACK * held.max(1.0) {
                self.positions.remove(&key);
            } else {
                self.positions.insert(key, left);
            }
        }
        self.fees_paid += fee;
        let fill = Execution { bar: t, timestamp: bar.timestamp, price, quantity: req.quantity, fee };
        Ok(self.ack(req, AckStatus::Accepted, Some(fill), None))
    }
}

impl Broker for SimulatedBroker {
    fn init(&mut self) -> Result<SessionInfo, BrokerError> {
        if self.closed {
            return Err(BrokerError::SessionClosed);
        }
        self.initialized = true;
        Ok(SessionInfo { symbols: self.feeds.iter().map(|s| s.symbol().to_string()).collect(), margin: self.margin })
    }

    /// Idempotent per client id: a repeated id returns the first ack untouched.
    fn place_order(&mut self, request: &OrderRequest) -> Result<OrderAck, BrokerError> {
        if !self.initialized {
            return Err(BrokerError::NotInitialized);
        }
        if self.closed {
            return Err(BrokerError::SessionClosed);
        }
        if let Some(ack) = self.acks.get(&request.client_id) {
            return Ok(ack.clone());
        }
        self.execute(request)
    }

    fn account(&self) -> AccountSnapshot {
        let positions = self
            .positions
            .iter()
            .map(|((symbol, side), q)| Position { symbol: symbol.clone(), side: *side, quantity: *q })
            .collect();
        AccountSnapshot { cash: self.cash, fees_paid: self.fees_paid, positions }
    }

    fn symbol_info(&self, symbol: &str) -> Result<SymbolInfo, BrokerError> {
        let leg = self.leg(symbol).ok_or_else(|| BrokerError::UnknownSymbol(symbol.to_string()))?;
        Ok(SymbolInfo {
            symbol: symbol.to_string(),
            interval_secs: self.feeds[leg].interval(),
            fee_rate: self.costs.fee_rate,
            slippage_bps: self.costs.slippage_bps,
        })
    }

    /// Flattens any remaining exposure at the current bar's close and ends the session.
    fn close_session(&mut self) -> Result<SessionSummary, BrokerError> {
        if self.closed {
            return Err(BrokerError::SessionClosed);
        }
        let mut liquidations = Vec::new();
        if self.bar.is_some() {
            self.quote = Quote::Close;
            let open: Vec<((String, PositionSide), f64)> =
                self.positions.iter().map(|(k, q)| (k.clone(), *q)).collect();
            for ((symbol, side), qty) in open {
                let order_side = if side == PositionSide::Long { OrderSide::Sell } else { OrderSide::Buy };
                let id = format!("liquidate-{}", self.next_id);
                let req = OrderRequest::market(id, symbol, order_side, side, qty);
                liquidations.push(self.execute(&req)?);
            }
        }
        self.closed = true;
        Ok(SessionSummary { account: self.account(), liquidations })
    }
}

impl Replay for SimulatedBroker {
    fn advance(&mut self) -> bool {
        let len = self.feeds.first().map_or(0, CandleSeries::len);
        let next = self.bar.map_or(0, |b| b + 1);
        if next >= len || self.quote == Quote::Close {
            return false;
        }
        self.bar = Some(next);
        true
    }

    fn finish(&mut self) {
        self.quote = Quote::Close;
    }

    fn current(&self) -> Option<usize> {
        self.bar
    }

    fn history(&self, leg: usize) -> &[Candle] {
        match self.bar {
            Some(t) => &self.feeds[leg].candles()[..=t],
            None => &[],
        }
    }

    fn symbols(&self) -> Vec<&str> {
        self.feeds.iter().map(CandleSeries::symbol).collect()
    }
}
