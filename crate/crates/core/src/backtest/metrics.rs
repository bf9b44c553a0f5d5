use serde::{Deserialize, Serialize};

use super::Trade;

pub const DEFAULT_DRAWDOWN_PENALTY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub net_profit_pct: f64,
    pub max_drawdown_pct: f64,
    /// Share of trades with positive net P&L; 0 without trades.
    pub win_rate: f64,
    pub trade_count: usize,
    pub final_equity: f64,
}

/// Metrics from an equity curve and the closed trades. Panics on an empty curve.
pub fn compute_metrics(equity: &[f64], trades: &[Trade]) -> Metrics {
    let first = equity[0];
    let last = *equity.last().expect("equity curve is empty");
    let mut peak = f64::NEG_INFINITY;
    let mut max_dd: f64 = 0.0;
    for &e in equity {
        peak = peak.max(e);
        if peak > 0.0 {
            max_dd = max_dd.max((peak - e) / peak * 100.0);
        }
    }
    let wins = trades.iter().filter(|t| t.pnl > 0.0).count();
    Metrics {
        net_profit_pct: (last - first) / first * 100.0,
        max_drawdown_pct: max_dd,
        win_rate: if trades.is_empty() { 0.0 } else { wins as f64 / trades.len() as f64 },
        trade_count: trades.len(),
        final_equity: last,
    }
}

/// Risk-penalised score: net profit minus `penalty` times max drawdown (both in percent).
pub fn score(metrics: &Metrics, penalty: f64) -> f64 {
    metrics.net_profit_pct - penalty * metrics.max_drawdown_pct
}
