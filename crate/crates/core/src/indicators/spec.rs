use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::streams;
use super::{check_len, check_period, IndicatorError, IndicatorOutput};
use crate::market_data::Candle;

/// A named indicator with its parameters.
///
/// Serialized with the indicator name under `name` and parameters inline,
/// e.g. `{ name = "macd", fast = 12, slow = 26, signal = 9 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndicatorSpec {
    Sma { period: usize },
    Ema { period: usize },
    Rsi { period: usize },
    Atr { period: usize },
    Macd { fast: usize, slow: usize, signal: usize },
    Bollinger { period: usize, k: f64 },
    Obv,
    Momentum { period: usize },
    ForceIndex { period: usize },
    Mfi { period: usize },
    Cci { period: usize },
    WilliamsR { period: usize },
    Adx { period: usize },
    Kst,
    Vpvr { period: usize, buckets: usize },
}

/// One named output line of an indicator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Column {
    pub name: String,
    pub output: IndicatorOutput,
}

const NAMES: [&str; 15] = [
    "sma",
    "ema",
    "rsi",
    "atr",
    "macd",
    "bollinger",
    "obv",
    "momentum",
    "force_index",
    "mfi",
    "cci",
    "williams_r",
    "adx",
    "kst",
    "vpvr",
];

impl IndicatorSpec {
    /// Builds a spec from an indicator name and a parameter map.
    pub fn from_parts(name: &str, params: &BTreeMap<String, f64>) -> Result<Self, IndicatorError> {
        let name = name.trim().to_ascii_lowercase();
        if !NAMES.contains(&name.as_str()) {
            return Err(IndicatorError::UnknownIndicator(name));
        }
        let mut obj = serde_json::Map::new();
        obj.insert("name".into(), serde_json::Value::String(name.clone()));
        for (k, v) in params {
            let value = if v.fract() == 0.0 && *v >= 0.0 && k != "k" {
                serde_json::Value::from(*v as u64)
            } else {
                serde_json::Value::from(*v)
            };
            obj.insert(k.clone(), value);
        }
        let spec: IndicatorSpec = serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| IndicatorError::InvalidParam(format!("{name}: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), IndicatorError> {
        use IndicatorSpec::*;
        match *self {
            Sma { period }
            | Ema { period }
            | Rsi { period }
            | Atr { period }
            | Momentum { period }
            | ForceIndex { period }
            | Mfi { period }
            | Cci { period }
            | WilliamsR { period }
            | Adx { period } => check_period(period, 1),
            Macd { fast, slow, signal } => {
                check_period(fast, 1)?;
                check_period(signal, 1)?;
                if fast >= slow {
                    return Err(IndicatorError::InvalidPeriods(format!("fast {fast} must be < slow {slow}")));
                }
                Ok(())
            }
            Bollinger { period, k } => {
                check_period(period, 2)?;
                if k.is_finite() && k > 0.0 {
                    Ok(())
                } else {
                    Err(IndicatorError::InvalidParam(format!("band multiplier must be positive, got {k}")))
                }
            }
            Vpvr { period, buckets } => {
                check_period(period, 1)?;
                if buckets == 0 {
                    return Err(IndicatorError::InvalidParam("bucket count must be at least 1".into()));
                }
                Ok(())
            }
            Obv | Kst => Ok(()),
        }
    }

    /// Short label used as a column prefix, e.g. `ema_9` or `macd_12_26_9`.
    pub fn label(&self) -> String {
        use IndicatorSpec::*;
        match self {
            Sma { period } => format!("sma_{period}"),
            Ema { period } => format!("ema_{period}"),
            Rsi { period } => format!("rsi_{period}"),
            Atr { period } => format!("atr_{period}"),
            Macd { fast, slow, signal } => format!("macd_{fast}_{slow}_{signal}"),
            Bollinger { period, k } => format!("bollinger_{period}_{k}"),
            Obv => "obv".into(),
            Momentum { period } => format!("momentum_{period}"),
            ForceIndex { period } => format!("force_index_{period}"),
            Mfi { period } => format!("mfi_{period}"),
            Cci { period } => format!("cci_{period}"),
            WilliamsR { period } => format!("williams_r_{period}"),
            Adx { period } => format!("adx_{period}"),
            Kst => "kst".into(),
            Vpvr { period, buckets } => format!("vpvr_{period}_{buckets}"),
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        let label = self.label();
        match self {
            IndicatorSpec::Macd { .. } => {
                vec![format!("{label}_line"), format!("{label}_signal"), format!("{label}_hist")]
            }
            IndicatorSpec::Bollinger { .. } => {
                vec![format!("{label}_upper"), format!("{label}_middle"), format!("{label}_lower")]
            }
            _ => vec![label],
        }
    }

    pub fn width(&self) -> usize {
        match self {
            IndicatorSpec::Macd { .. } | IndicatorSpec::Bollinger { .. } => 3,
            _ => 1,
        }
    }

    /// Index of the first bar at which every output line is defined.
    pub fn warmup(&self) -> usize {
        use IndicatorSpec::*;
        match *self {
            Sma { period } | Ema { period } | Cci { period } | WilliamsR { period } => period - 1,
            Bollinger { period, .. } | Vpvr { period, .. } => period - 1,
            Rsi { period } | Atr { period } | Momentum { period } | ForceIndex { period } | Mfi { period } => period,
            Adx { period } => 2 * period - 1,
            Macd { slow, signal, .. } => slow + signal - 2,
            Obv => 0,
            Kst => streams::Kst::warmup(),
        }
    }

    pub fn stream(&self) -> IndicatorStream {
        use IndicatorSpec::*;
        match *self {
            Sma { period } => IndicatorStream::Sma(streams::Sma::new(period)),
            Ema { period } => IndicatorStream::Ema(streams::Ema::new(period)),
            Rsi { period } => IndicatorStream::Rsi(streams::Rsi::new(period)),
            Atr { period } => IndicatorStream::Atr(streams::Atr::new(period)),
            Macd { fast, slow, signal } => IndicatorStream::Macd(streams::Macd::new(fast, slow, signal)),
            Bollinger { period, k } => IndicatorStream::Bollinger(streams::Bollinger::new(period, k)),
            Obv => IndicatorStream::Obv(streams::Obv::new()),
            Momentum { period } => IndicatorStream::Momentum(streams::Momentum::new(period)),
            ForceIndex { period } => IndicatorStream::ForceIndex(streams::ForceIndex::new(period)),
            Mfi { period } => IndicatorStream::Mfi(streams::Mfi::new(period)),
            Cci { period } => IndicatorStream::Cci(streams::Cci::new(period)),
            WilliamsR { period } => IndicatorStream::WilliamsR(streams::WilliamsR::new(period)),
            Adx { period } => IndicatorStream::Adx(streams::Adx::new(period)),
            Kst => IndicatorStream::Kst(Box::default()),
            Vpvr { period, buckets } => IndicatorStream::Vpvr(streams::Vpvr::new(period, buckets)),
        }
    }

    pub fn compute(&self, candles: &[Candle]) -> Result<Vec<Column>, IndicatorError> {
        self.validate()?;
        check_len(candles.len(), self.warmup())?;
        let width = self.width();
        let mut lines = vec![Vec::with_capacity(candles.len()); width];
        let mut stream = self.stream();
        let mut row = Vec::with_capacity(width);
        for c in candles {
            row.clear();
            stream.update(c, &mut row);
            for (line, v) in lines.iter_mut().zip(&row) {
                line.push(*v);
            }
        }
        Ok(self
            .column_names()
            .into_iter()
            .zip(lines)
            .map(|(name, values)| Column { name, output: IndicatorOutput::from_values(values) })
            .collect())
    }
}

impl fmt::Display for IndicatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Parses `name` or `name:key=value,key=value`, e.g. `macd:fast=12,slow=26,signal=9`.
impl FromStr for IndicatorSpec {
    type Err = IndicatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = BTreeMap::new();
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| IndicatorError::InvalidParam(format!("expected key=value, got `{pair}`")))?;
            let v: f64 =
                v.trim().parse().map_err(|_| IndicatorError::InvalidParam(format!("`{v}` is not a number")))?;
            params.insert(k.trim().to_string(), v);
        }
        Self::from_parts(name, &params)
    }
}

/// Streaming state for any [`IndicatorSpec`]; emits one value per output line per bar.
#[derive(Debug, Clone)]
pub enum IndicatorStream {
    Sma(streams::Sma),
    Ema(streams::Ema),
    Rsi(streams::Rsi),
    Atr(streams::Atr),
    Macd(streams::Macd),
    Bollinger(streams::Bollinger),
    Obv(streams::Obv),
    Momentum(streams::Momentum),
    ForceIndex(streams::ForceIndex),
    Mfi(streams::Mfi),
    Cci(streams::Cci),
    WilliamsR(streams::WilliamsR),
    Adx(streams::Adx),
    Kst(Box<streams::Kst>),
    Vpvr(streams::Vpvr),
}

impl IndicatorStream {
    /// Appends this bar's values (one per output line) to `row`.
    pub fn update(&mut self, bar: &Candle, row: &mut Vec<Option<f64>>) {
        use IndicatorStream::*;
        match self {
            Sma(s) => row.push(s.update(bar)),
            Ema(s) => row.push(s.update(bar)),
            Rsi(s) => row.push(s.update(bar)),
            Atr(s) => row.push(s.update(bar)),
            Obv(s) => row.push(s.update(bar)),
            Momentum(s) => row.push(s.update(bar)),
            ForceIndex(s) => row.push(s.update(bar)),
            Mfi(s) => row.push(s.update(bar)),
            Cci(s) => row.push(s.update(bar)),
            WilliamsR(s) => row.push(s.update(bar)),
            Adx(s) => row.push(s.update(bar)),
            Kst(s) => row.push(s.update(bar)),
            Vpvr(s) => row.push(s.update(bar)),
            Macd(s) => {
                let p = s.update(bar);
                row.push(p.map(|p| p.macd));
                row.push(p.and_then(|p| p.signal));
                row.push(p.and_then(|p| p.histogram));
            }
            Bollinger(s) => {
                let b = s.update(bar);
                row.push(b.map(|b| b.upper));
                row.push(b.map(|b| b.middle));
                row.push(b.map(|b| b.lower));
            }
        }
    }
}
