//! Incremental indicator state machines.
//!
//! Each stream consumes one candle at a time and yields `None` until its
//! warm-up is satisfied, then `Some` forever after. The batch functions in the
//! parent module are thin drivers over these, so a strategy that feeds bars
//! one by one sees bit-identical values to a batch computation over the same
//! prefix.

use std::collections::VecDeque;

use crate::market_data::Candle;

/// Fixed-length sliding window over plain values.
#[derive(Debug, Clone)]
struct Window<T> {
    cap: usize,
    buf: VecDeque<T>,
}

impl<T: Copy> Window<T> {
    fn new(cap: usize) -> Self {
        Self { cap, buf: VecDeque::with_capacity(cap + 1) }
    }

    fn push(&mut self, x: T) {
        self.buf.push_back(x);
        if self.buf.len() > self.cap {
            self.buf.pop_front();
        }
    }

    fn full(&self) -> bool {
        self.buf.len() == self.cap
    }

    fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        self.buf.iter()
    }

    fn front(&self) -> Option<T> {
        self.buf.front().copied()
    }
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    xs.sum::<f64>() / n as f64
}

/// Simple moving average over a value stream.
#[derive(Debug, Clone)]
pub struct SmaState {
    window: Window<f64>,
}

impl SmaState {
    pub fn new(period: usize) -> Self {
        Self { window: Window::new(period) }
    }

    pub fn push(&mut self, x: f64) -> Option<f64> {
        self.window.push(x);
        self.window.full().then(|| mean(self.window.iter().copied(), self.window.cap))
    }
}

/// EMA over a value stream, seeded with the SMA of the first `period` values.
#[derive(Debug, Clone)]
pub struct EmaState {
    period: usize,
    k: f64,
    count: usize,
    seed_sum: f64,
    value: Option<f64>,
}

impl EmaState {
    pub fn new(period: usize) -> Self {
        Self { period, k: 2.0 / (period as f64 + 1.0), count: 0, seed_sum: 0.0, value: None }
    }

    pub fn push(&mut self, x: f64) -> Option<f64> {
        self.count += 1;
        self.value = match self.value {
            Some(prev) => Some(prev + self.k * (x - prev)),
            None => {
                self.seed_sum += x;
                (self.count == self.period).then(|| self.seed_sum / self.period as f64)
            }
        };
        self.value
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }
}

/// Wilder smoothing (alpha = 1/period), seeded with the mean of the first `period` values.
#[derive(Debug, Clone)]
pub struct WilderState {
    period: usize,
    count: usize,
    seed_sum: f64,
    value: Option<f64>,
}

impl WilderState {
    pub fn new(period: usize) -> Self {
        Self { period, count: 0, seed_sum: 0.0, value: None }
    }

    pub fn push(&mut self, x: f64) -> Option<f64> {
        self.count += 1;
        let p = self.period as f64;
        self.value = match self.value {
            Some(prev) => Some(prev + (x - prev) / p),
            None => {
                self.seed_sum += x;
                (self.count == self.period).then(|| self.seed_sum / p)
            }
        };
        self.value
    }
}

fn true_range(bar: &Candle, prev_close: f64) -> f64 {
    (bar.high - bar.low).max((bar.high - prev_close).abs()).max((bar.low - prev_close).abs())
}

#[derive(Debug, Clone)]
pub struct Sma(SmaState);

impl Sma {
    pub fn new(period: usize) -> Self {
        Self(SmaState::new(period))
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        self.0.push(bar.close)
    }
}

#[derive(Debug, Clone)]
pub struct Ema(EmaState);

impl Ema {
    pub fn new(period: usize) -> Self {
        Self(EmaState::new(period))
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        self.0.push(bar.close)
    }
}

#[derive(Debug, Clone)]
pub struct Rsi {
    prev_close: Option<f64>,
    gains: WilderState,
    losses: WilderState,
}

impl Rsi {
    pub fn new(period: usize) -> Self {
        Self { prev_close: None, gains: WilderState::new(period), losses: WilderState::new(period) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        let prev = self.prev_close.replace(bar.close)?;
        let change = bar.close - prev;
        let gain = self.gains.push(change.max(0.0));
        let loss = self.losses.push((-change).max(0.0));
        let (gain, loss) = (gain?, loss?);
        Some(if loss == 0.0 {
            if gain == 0.0 {
                50.0
            } else {
                100.0
            }
        } else {
            100.0 - 100.0 / (1.0 + gain / loss)
        })
    }
}

#[derive(Debug, Clone)]
pub struct Atr {
    prev_close: Option<f64>,
    smooth: WilderState,
}

impl Atr {
    pub fn new(period: usize) -> Self {
        Self { prev_close: None, smooth: WilderState::new(period) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        let prev = self.prev_close.replace(bar.close)?;
        self.smooth.push(true_range(bar, prev))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacdPoint {
    pub macd: f64,
    pub signal: Option<f64>,
    pub histogram: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Macd {
    fast: EmaState,
    slow: EmaState,
    signal: EmaState,
}

impl Macd {
    pub fn new(fast: usize, slow: usize, signal: usize) -> Self {
        Self { fast: EmaState::new(fast), slow: EmaState::new(slow), signal: EmaState::new(signal) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<MacdPoint> {
        let fast = self.fast.push(bar.close);
        let slow = self.slow.push(bar.close);
        let macd = fast? - slow?;
        let signal = self.signal.push(macd);
        Some(MacdPoint { macd, signal, histogram: signal.map(|s| macd - s) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands {
    pub upper: f64,
    pub middle: f64,
    pub lower: f64,
}

#[derive(Debug, Clone)]
pub struct Bollinger {
    k: f64,
    window: Window<f64>,
}

impl Bollinger {
    pub fn new(period: usize, k: f64) -> Self {
        Self { k, window: Window::new(period) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<Bands> {
        self.window.push(bar.close);
        if !self.window.full() {
            return None;
        }
        let n = self.window.cap;
        let middle = mean(self.window.iter().copied(), n);
        let var = mean(self.window.iter().map(|x| (x - middle) * (x - middle)), n);
        let width = self.k * var.sqrt();
        Some(Bands { upper: middle + width, middle, lower: middle - width })
    }
}

#[derive(Debug, Clone, Default)]
pub struct Obv {
    prev_close: Option<f64>,
    value: f64,
}

impl Obv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        if let Some(prev) = self.prev_close {
            if bar.close > prev {
                self.value += bar.volume;
            } else if bar.close < prev {
                self.value -= bar.volume;
            }
        }
        self.prev_close = Some(bar.close);
        Some(self.value)
    }
}

#[derive(Debug, Clone)]
pub struct Momentum {
    closes: Window<f64>,
}

impl Momentum {
    pub fn new(period: usize) -> Self {
        Self { closes: Window::new(period + 1) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        self.closes.push(bar.close);
        if self.closes.full() {
            Some(bar.close - self.closes.front()?)
        } else {
            None
        }
    }
}

/// Rate of change in percent over `period` bars.
#[derive(Debug, Clone)]
struct Roc {
    closes: Window<f64>,
}

impl Roc {
    fn new(period: usize) -> Self {
        Self { closes: Window::new(period + 1) }
    }

    fn push(&mut self, close: f64) -> Option<f64> {
        self.closes.push(close);
        if self.closes.full() {
            Some(100.0 * (close / self.closes.front()? - 1.0))
        } else {
            None
        }
    }
}

/// EMA of `(close - prev_close) * volume`.
#[derive(Debug, Clone)]
pub struct ForceIndex {
    prev_close: Option<f64>,
    smooth: EmaState,
}

impl ForceIndex {
    pub fn new(period: usize) -> Self {
        Self { prev_close: None, smooth: EmaState::new(period) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        let prev = self.prev_close.replace(bar.close)?;
        self.smooth.push((bar.close - prev) * bar.volume)
    }
}

#[derive(Debug, Clone)]
pub struct Mfi {
    prev_tp: Option<f64>,
    flows: Window<(f64, f64)>,
}

impl Mfi {
    pub fn new(period: usize) -> Self {
        Self { prev_tp: None, flows: Window::new(period) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        let tp = bar.typical_price();
        let prev = self.prev_tp.replace(tp)?;
        let raw = tp * bar.volume;
        let flow = if tp > prev {
            (raw, 0.0)
        } else if tp < prev {
            (0.0, raw)
        } else {
            (0.0, 0.0)
        };
        self.flows.push(flow);
        if !self.flows.full() {
            return None;
        }
        let pos: f64 = self.flows.iter().map(|f| f.0).sum();
        let neg: f64 = self.flows.iter().map(|f| f.1).sum();
        Some(if neg == 0.0 {
            if pos == 0.0 {
                50.0
            } else {
                100.0
            }
        } else {
            100.0 - 100.0 / (1.0 + pos / neg)
        })
    }
}

/// Commodity Channel Index with the conventional 0.015 constant.
#[derive(Debug, Clone)]
pub struct Cci {
    window: Window<f64>,
}

impl Cci {
    pub const CONSTANT: f64 = 0.015;

    pub fn new(period: usize) -> Self {
        Self { window: Window::new(period) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        let tp = bar.typical_price();
        self.window.push(tp);
        if !self.window.full() {
            return None;
        }
        let n = self.window.cap;
        let avg = mean(self.window.iter().copied(), n);
        let mad = mean(self.window.iter().map(|x| (x - avg).abs()), n);
        Some(if mad == 0.0 { 0.0 } else { (tp - avg) / (Self::CONSTANT * mad) })
    }
}

#[derive(Debug, Clone)]
pub struct WilliamsR {
    window: Window<(f64, f64)>,
}

impl WilliamsR {
    pub fn new(period: usize) -> Self {
        Self { window: Window::new(period) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        self.window.push((bar.high, bar.low));
        if !self.window.full() {
            return None;
        }
        let hh = self.window.iter().map(|w| w.0).fold(f64::NEG_INFINITY, f64::max);
        let ll = self.window.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
        // hh == ll forces close == hh
        Some(if hh == ll { 0.0 } else { -100.0 * (hh - bar.close) / (hh - ll) })
    }
}

#[derive(Debug, Clone)]
pub struct Adx {
    prev: Option<Candle>,
    tr: WilderState,
    plus_dm: WilderState,
    minus_dm: WilderState,
    adx: WilderState,
}

impl Adx {
    pub fn new(period: usize) -> Self {
        Self {
            prev: None,
            tr: WilderState::new(period),
            plus_dm: WilderState::new(period),
            minus_dm: WilderState::new(period),
            adx: WilderState::new(period),
        }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        let prev = self.prev.replace(*bar)?;
        let up = bar.high - prev.high;
        let down = prev.low - bar.low;
        let plus = if up > down && up > 0.0 { up } else { 0.0 };
        let minus = if down > up && down > 0.0 { down } else { 0.0 };
        let tr = self.tr.push(true_range(bar, prev.close));
        let plus = self.plus_dm.push(plus);
        let minus = self.minus_dm.push(minus);
        let (tr, plus, minus) = (tr?, plus?, minus?);
        let (plus_di, minus_di) = if tr == 0.0 { (0.0, 0.0) } else { (100.0 * plus / tr, 100.0 * minus / tr) };
        let di_sum = plus_di + minus_di;
        let dx = if di_sum == 0.0 { 0.0 } else { 100.0 * (plus_di - minus_di).abs() / di_sum };
        self.adx.push(dx)
    }
}

/// Know Sure Thing: weighted sum of four smoothed rates of change.
#[derive(Debug, Clone)]
pub struct Kst {
    legs: [(Roc, SmaState, f64); 4],
}

impl Kst {
    pub const ROC_PERIODS: [usize; 4] = [10, 15, 20, 30];
    pub const SMA_PERIODS: [usize; 4] = [10, 10, 10, 15];
    pub const WEIGHTS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

    pub fn new() -> Self {
        let leg = |i: usize| (Roc::new(Self::ROC_PERIODS[i]), SmaState::new(Self::SMA_PERIODS[i]), Self::WEIGHTS[i]);
        Self { legs: [leg(0), leg(1), leg(2), leg(3)] }
    }

    pub fn warmup() -> usize {
        (0..4).map(|i| Self::ROC_PERIODS[i] + Self::SMA_PERIODS[i] - 1).max().unwrap_or(0)
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        let mut total = Some(0.0);
        for (roc, sma, weight) in &mut self.legs {
            let smoothed = roc.push(bar.close).and_then(|r| sma.push(r));
            total = match (total, smoothed) {
                (Some(t), Some(s)) => Some(t + *weight * s),
                _ => None,
            };
        }
        total
    }
}

impl Default for Kst {
    fn default() -> Self {
        Self::new()
    }
}

/// Volume-by-price histogram of a run of candles.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeProfile {
    pub low: f64,
    pub high: f64,
    pub volumes: Vec<f64>,
}

impl VolumeProfile {
    /// Buckets split `[min low, max high]` evenly; each candle's full volume
    /// lands in the bucket holding its typical price.
    pub fn build(candles: &[Candle], buckets: usize) -> Self {
        let low = candles.iter().map(|c| c.low).fold(f64::INFINITY, f64::min);
        let high = candles.iter().map(|c| c.high).fold(f64::NEG_INFINITY, f64::max);
        let mut volumes = vec![0.0; buckets.max(1)];
        for c in candles {
            let idx = Self::bucket_of(c.typical_price(), low, high, volumes.len());
            volumes[idx] += c.volume;
        }
        Self { low, high, volumes }
    }

    fn bucket_of(price: f64, low: f64, high: f64, buckets: usize) -> usize {
        if high <= low {
            return 0;
        }
        let raw = ((price - low) / (high - low) * buckets as f64).floor();
        (raw.max(0.0) as usize).min(buckets - 1)
    }

    pub fn bucket_width(&self) -> f64 {
        (self.high - self.low) / self.volumes.len() as f64
    }

    /// Midpoint price of the highest-volume bucket (lowest bucket wins ties).
    pub fn point_of_control(&self) -> f64 {
        let mut best = 0;
        for (i, v) in self.volumes.iter().enumerate() {
            if *v > self.volumes[best] {
                best = i;
            }
        }
        self.low + (best as f64 + 0.5) * self.bucket_width()
    }
}

/// Rolling visible-range volume profile; emits the point-of-control price.
#[derive(Debug, Clone)]
pub struct Vpvr {
    buckets: usize,
    window: Window<Candle>,
}

impl Vpvr {
    pub fn new(period: usize, buckets: usize) -> Self {
        Self { buckets, window: Window::new(period) }
    }

    pub fn update(&mut self, bar: &Candle) -> Option<f64> {
        self.window.push(*bar);
        if !self.window.full() {
            return None;
        }
        let bars: Vec<Candle> = self.window.iter().copied().collect();
        Some(VolumeProfile::build(&bars, self.buckets).point_of_control())
    }
}
