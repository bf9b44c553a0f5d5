//! Seeded random candle fixtures for tests.

#![allow(dead_code)]

use cognitrade::market_data::ParseOptions;
use cognitrade::{Candle, CandleSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Geometric random walk with consistent OHLC and random volume.
pub fn random_walk_candles(rng: &mut impl Rng, len: usize, start: f64, vol: f64) -> Vec<Candle> {
    let mut price = start;
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let open = price;
        let close = (open * (1.0 + rng.gen_range(-vol..vol))).max(0.01);
        let top = open.max(close);
        let bottom = open.min(close);
        let high = top * (1.0 + rng.gen_range(0.0..vol / 2.0));
        let low = (bottom * (1.0 - rng.gen_range(0.0..vol / 2.0))).max(0.005);
        let volume = rng.gen_range(1.0..1000.0);
        out.push(Candle::new(i as i64 * 60_000, open, high, low, close, volume));
        price = close;
    }
    out
}

pub fn random_series(seed: u64, len: usize) -> CandleSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candles = random_walk_candles(&mut rng, len, 100.0, 0.02);
    CandleSeries::new("RND", 60, candles, ParseOptions::default()).unwrap()
}

/// Continues `series` with `extra` random bars drawn from `rng`.
pub fn extend_random(series: &CandleSeries, extra: usize, rng: &mut impl Rng) -> CandleSeries {
    let last = *series.candles().last().unwrap();
    let mut tail = random_walk_candles(rng, extra, last.close, 0.02);
    for (i, c) in tail.iter_mut().enumerate() {
        c.timestamp = last.timestamp + (i as i64 + 1) * series.interval_ms();
    }
    let mut all = series.candles().to_vec();
    all.extend(tail);
    CandleSeries::new(series.symbol(), series.interval(), all, ParseOptions::default()).unwrap()
}

pub fn series_from_closes(symbol: &str, closes: &[f64]) -> CandleSeries {
    let candles = closes.iter().enumerate().map(|(i, &c)| Candle::flat(i as i64 * 60_000, c, 1.0)).collect();
    CandleSeries::new(symbol, 60, candles, ParseOptions::default()).unwrap()
}
