//! OHLCV candles, validated series, CSV ingestion and the on-disk warehouse.
//!
//! A [`CandleSeries`] is immutable once built. Every constructor path goes
//! through [`CandleSeries::new`], which enforces the candle invariants and
//! the regular-spacing rule.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Column header of every candle CSV, in order.
pub const CSV_HEADER: &str = "timestamp,open,high,low,close,volume";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: bad header, expected `{CSV_HEADER}`")]
    BadHeader { line: usize },
    #[error("line {line}: OHLC invariant violated: {reason}")]
    OhlcViolation { line: usize, reason: String },
    #[error("line {line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { line: usize, timestamp: i64 },
    #[error("gap detected between {prev} and {next} (interval {interval_ms} ms)")]
    GapDetected { prev: i64, next: i64, interval_ms: i64 },
    #[error("no candles in window [{from}, {to}]")]
    EmptyWindow { from: i64, to: i64 },
    #[error("invalid window: from {from} > to {to}")]
    InvalidWindow { from: i64, to: i64 },
    #[error("series of {len} bars is shorter than resample factor {factor}")]
    EmptyResult { len: usize, factor: usize },
    #[error("resample factor must be at least 1")]
    ZeroFactor,
    #[error("operation requires a gap-free series")]
    GappedSeries,
    #[error("interval must be positive")]
    ZeroInterval,
    #[error("series is empty")]
    EmptySeries,
    #[error("series are not aligned: {0}")]
    Misaligned(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("metadata error: {0}")]
    Meta(#[from] serde_json::Error),
}

/// One OHLCV bar. `timestamp` is the bar open time in ms since the epoch (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Candle {
    pub fn new(timestamp: i64, open: f64, high: f64, low: f64, close: f64, volume: f64) -> Self {
        Self { timestamp, open, high, low, close, volume }
    }

    /// A bar where open, high, low and close all equal `price`.
    pub fn flat(timestamp: i64, price: f64, volume: f64) -> Self {
        Self::new(timestamp, price, price, price, price, volume)
    }

    pub fn typical_price(&self) -> f64 {
        (self.high + self.low + self.close) / 3.0
    }

    /// Checks the OHLC and volume invariants, returning a reason on failure.
    pub fn check(&self) -> Result<(), String> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err("prices must be finite and positive".into());
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err("volume must be finite and non-negative".into());
        }
        if self.low > self.high {
            return Err(format!("low {} > high {}", self.low, self.high));
        }
        if self.open < self.low || self.open > self.high {
            return Err(format!("open {} outside [{}, {}]", self.open, self.low, self.high));
        }
        if self.close < self.low || self.close > self.high {
            return Err(format!("close {} outside [{}, {}]", self.close, self.low, self.high));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Downgrade missing bars from an error to a warning; the series is marked gapped.
    pub allow_gaps: bool,
}

/// An ordered, validated run of candles for one symbol at a fixed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CandleSeries {
    symbol: String,
    interval: u64,
    candles: Vec<Candle>,
    gapped: bool,
}

impl CandleSeries {
    /// Validates and sorts `candles`. `interval` is in seconds.
    pub fn new(
        symbol: impl Into<String>,
        interval: u64,
        candles: Vec<Candle>,
        opts: ParseOptions,
    ) -> Result<Self, DataError> {
        let lines: Vec<usize> = (1..=candles.len()).collect();
        Self::build(symbol.into(), interval, candles.into_iter().zip(lines).collect(), opts)
    }

    /// `rows` pairs every candle with the source line used in error messages.
    fn build(
        symbol: String,
        interval: u64,
        mut rows: Vec<(Candle, usize)>,
        opts: ParseOptions,
    ) -> Result<Self, DataError> {
        if interval == 0 {
            return Err(DataError::ZeroInterval);
        }
        for (c, line) in &rows {
            c.check().map_err(|reason| DataError::OhlcViolation { line: *line, reason })?;
        }
        rows.sort_by_key(|(c, _)| c.timestamp);
        let step = interval as i64 * 1000;
        let mut gapped = false;
        for pair in rows.windows(2) {
            let (prev, next) = (&pair[0].0, &pair[1].0);
            if prev.timestamp == next.timestamp {
                return Err(DataError::DuplicateTimestamp { line: pair[1].1, timestamp: next.timestamp });
            }
            if next.timestamp - prev.timestamp != step {
                if !opts.allow_gaps {
                    return Err(DataError::GapDetected {
                        prev: prev.timestamp,
                        next: next.timestamp,
                        interval_ms: step,
                    });
                }
                log::warn!("{symbol}: gap between {} and {} accepted (allow_gaps)", prev.timestamp, next.timestamp);
                gapped = true;
            }
        }
        Ok(Self { symbol, interval, candles: rows.into_iter().map(|(c, _)| c).collect(), gapped })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    /// Bar duration in seconds.
    pub fn interval(&self) -> u64 {
        self.interval
    }

    pub fn interval_ms(&self) -> i64 {
        self.interval as i64 * 1000
    }

    pub fn candles(&self) -> &[Candle] {
        &self.candles
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    /// True when the series was accepted with missing bars.
    pub fn is_gapped(&self) -> bool {
        self.gapped
    }

    pub fn closes(&self) -> Vec<f64> {
        self.candles.iter().map(|c| c.close).collect()
    }

    /// A copy holding only the first `len` bars.
    pub fn prefix(&self, len: usize) -> CandleSeries {
        CandleSeries {
            symbol: self.symbol.clone(),
            interval: self.interval,
            candles: self.candles[..len.min(self.candles.len())].to_vec(),
            gapped: self.gapped,
        }
    }

    pub fn meta(&self, source: impl Into<String>) -> Option<DatasetMeta> {
        let first = self.candles.first()?;
        let last = self.candles.last()?;
        Some(DatasetMeta {
            source: source.into(),
            symbol: self.symbol.clone(),
            interval: self.interval,
            first_ts: first.timestamp,
            last_ts: last.timestamp,
            bar_count: self.candles.len(),
            gapped: self.gapped,
        })
    }
}

impl AsRef<[Candle]> for CandleSeries {
    fn as_ref(&self) -> &[Candle] {
        &self.candles
    }
}

/// Sidecar metadata written next to each warehouse file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    pub symbol: String,
    pub interval: u64,
    pub first_ts: i64,
    pub last_ts: i64,
    pub bar_count: usize,
    #[serde(default)]
    pub gapped: bool,
}

impl DatasetMeta {
    /// Bar count a gap-free series spanning `first_ts..=last_ts` must have.
    pub fn expected_bar_count(&self) -> usize {
        ((self.last_ts - self.first_ts) / (self.interval as i64 * 1000)) as usize + 1
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, name: &str, line: usize) -> Result<T, DataError> {
    raw.trim()
        .parse()
        .map_err(|_| DataError::MalformedRow { line, reason: format!("cannot parse {name} from `{raw}`") })
}

/// Parses candle CSV from any reader. Rows may appear in any order.
pub fn read_csv<R: Read>(
    reader: R,
    symbol: &str,
    interval: u64,
    opts: ParseOptions,
) -> Result<CandleSeries, DataError> {
    let reader = BufReader::new(reader);
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DataError::Io { path: PathBuf::from("<reader>"), source })?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if !saw_header {
            let cols: Vec<&str> = text.split(',').map(str::trim).collect();
            if cols.join(",") != CSV_HEADER {
                return Err(DataError::BadHeader { line: line_no });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 6 {
            return Err(DataError::MalformedRow {
                line: line_no,
                reason: format!("expected 6 columns, found {}", fields.len()),
            });
        }
        let candle = Candle {
            timestamp: parse_field(fields[0], "timestamp", line_no)?,
            open: parse_field(fields[1], "open", line_no)?,
            high: parse_field(fields[2], "high", line_no)?,
            low: parse_field(fields[3], "low", line_no)?,
            close: parse_field(fields[4], "close", line_no)?,
            volume: parse_field(fields[5], "volume", line_no)?,
        };
        rows.push((candle, line_no));
    }
    if !saw_header {
        return Err(DataError::BadHeader { line: 1 });
    }
    CandleSeries::build(symbol.to_string(), interval, rows, opts)
}

pub fn parse_csv(
    path: impl AsRef<Path>,
    symbol: &str,
    interval: u64,
    opts: ParseOptions,
) -> Result<CandleSeries, DataError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| DataError::Io { path: path.into(), source })?;
    read_csv(file, symbol, interval, opts)
}

/// Renders a series as CSV. Floats use the shortest representation that
/// parses back to the same value, so `read_csv(to_csv(s)) == s`.
pub fn to_csv(series: &CandleSeries) -> String {
    let mut out = String::with_capacity(series.len() * 48 + CSV_HEADER.len() + 1);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for c in series.candles() {
        let _ = writeln!(out, "{},{},{},{},{},{}", c.timestamp, c.open, c.high, c.low, c.close, c.volume);
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, series: &CandleSeries) -> Result<(), DataError> {
    write_atomic(path.as_ref(), to_csv(series).as_bytes())
}

/// Writes via a sibling temp file and rename so readers never see a partial file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DataError> {
    let io_err = |source| DataError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

/// Contiguous sub-series with `from_ts <= timestamp <= to_ts`.
pub fn slice_window(series: &CandleSeries, from_ts: i64, to_ts: i64) -> Result<CandleSeries, DataError> {
    if from_ts > to_ts {
        return Err(DataError::InvalidWindow { from: from_ts, to: to_ts });
    }
    let candles = series.candles();
    let start = candles.partition_point(|c| c.timestamp < from_ts);
    let end = candles.partition_point(|c| c.timestamp <= to_ts);
    if start >= end {
        return Err(DataError::EmptyWindow { from: from_ts, to: to_ts });
    }
    Ok(CandleSeries {
        symbol: series.symbol.clone(),
        interval: series.interval,
        candles: candles[start..end].to_vec(),
        gapped: series.gapped,
    })
}

/// Aggregates every `factor` consecutive bars into one; a trailing partial group is dropped.
pub fn resample(series: &CandleSeries, factor: usize) -> Result<CandleSeries, DataError> {
    if factor == 0 {
        return Err(DataError::ZeroFactor);
    }
    if series.gapped {
        return Err(DataError::GappedSeries);
    }
    if series.len() < factor {
        return Err(DataError::EmptyResult { len: series.len(), factor });
    }
    let candles = series
        .candles()
        .chunks_exact(factor)
        .map(|group| {
            let first = group[0];
            let last = group[group.len() - 1];
            Candle {
                timestamp: first.timestamp,
                open: first.open,
                close: last.close,
                high: group.iter().map(|c| c.high).fold(f64::NEG_INFINITY, f64::max),
                low: group.iter().map(|c| c.low).fold(f64::INFINITY, f64::min),
                volume: group.iter().map(|c| c.volume).sum(),
            }
        })
        .collect();
    Ok(CandleSeries {
        symbol: series.symbol.clone(),
        interval: series.interval * factor as u64,
        candles,
        gapped: false,
    })
}

/// Checks that several series share the exact same timestamps.
pub fn check_aligned(series: &[&CandleSeries]) -> Result<(), DataError> {
    let Some(first) = series.first() else {
        return Ok(());
    };
    for other in &series[1..] {
        if other.len() != first.len() {
            return Err(DataError::Misaligned(format!(
                "{} has {} bars, {} has {}",
                first.symbol,
                first.len(),
                other.symbol,
                other.len()
            )));
        }
        let mismatch = first.candles().iter().zip(other.candles()).position(|(a, b)| a.timestamp != b.timestamp);
        if let Some(i) = mismatch {
            return Err(DataError::Misaligned(format!("timestamps differ at bar {i}")));
        }
    }
    Ok(())
}

/// Warehouse layout: `<root>/<symbol>/<interval>.csv` plus `<interval>.meta.json`.
#[derive(Debug, Clone)]
pub struct Warehouse {
    root: PathBuf,
}

impl Warehouse {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn series_path(&self, symbol: &str, interval: u64) -> PathBuf {
        self.root.join(symbol).join(format!("{interval}.csv"))
    }

    pub fn meta_path(&self, symbol: &str, interval: u64) -> PathBuf {
        self.root.join(symbol).join(format!("{interval}.meta.json"))
    }

    /// Stores `series` and its metadata sidecar, replacing any previous copy.
    pub fn store(&self, series: &CandleSeries, source: &str) -> Result<DatasetMeta, DataError> {
        let meta = series.meta(source).ok_or(DataError::EmptySeries)?;
        let mut meta_json = serde_json::to_string_pretty(&meta)?;
        meta_json.push('\n');
        write_csv(self.series_path(series.symbol(), series.interval()), series)?;
        write_atomic(&self.meta_path(series.symbol(), series.interval()), meta_json.as_bytes())?;
        Ok(meta)
    }

    pub fn load(&self, symbol: &str, interval: u64) -> Result<CandleSeries, DataError> {
        let meta = self.load_meta(symbol, interval).ok();
        let opts = ParseOptions { allow_gaps: meta.map(|m| m.gapped).unwrap_or(false) };
        parse_csv(self.series_path(symbol, interval), symbol, interval, opts)
    }

    pub fn load_meta(&self, symbol: &str, interval: u64) -> Result<DatasetMeta, DataError> {
        let path = self.meta_path(symbol, interval);
        let text = fs::read_to_string(&path).map_err(|source| DataError::Io { path, source })?;
        Ok(serde_json::from_str(&text)?)
    }
}
