//! Cognitive-trading engine: technical indicators feeding heuristic
//! strategies, tuned by grid/GA search and NEAT neuroevolution, validated by a
//! bar-by-bar backtester and executed through a broker abstraction.
pub mod backtest;
pub mod broker;
pub mod evolution;
pub mod indicators;
pub mod market_data;
pub mod strategy;
pub use market_data::{Candle, CandleSeries};
