use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::backtest::{run_strategy, BacktestSettings};
use crate::indicators::{IndicatorSpec, IndicatorStream};
use crate::market_data::{Candle, CandleSeries};
use crate::strategy::{
    expect_legs, Cursor, Leg, PositionBook, Side, Size, StepOutput, Strategy, StrategyError, TradeIntent,
};

use super::genome::{ConnectionGene, Genome, Network, NodeGene, NodeKind};
use super::population::{evolve, EvolutionRun};
use super::{EvolutionConfig, EvolutionError};

/// Network outputs, in order.
pub const OUTPUTS: usize = 3;
const OUT_OPEN: usize = 0;
const OUT_CLOSE: usize = 1;

const FILE_HEADER: &str = "cognitrade-genome 1";

/// One network input: a line of an indicator, z-scored with training-window stats.
#[derive(Debug, Clone, PartialEq)]
pub struct InputColumn {
    pub spec: IndicatorSpec,
    /// Output line of `spec` (MACD and Bollinger have three).
    pub line: usize,
    pub mean: f64,
    pub std: f64,
}

impl InputColumn {
    pub fn normalize(&self, v: f64) -> f64 {
        if self.std > 0.0 {
            (v - self.mean) / self.std
        } else {
            0.0
        }
    }
}

/// A genome together with its input definition.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub inputs: Vec<InputColumn>,
    pub genome: Genome,
}

/// Input columns for `specs` with mean and population std of each line's
/// defined values over `train`.
pub fn input_columns(specs: &[IndicatorSpec], train: &[Candle]) -> Result<Vec<InputColumn>, EvolutionError> {
    let mut out = Vec::new();
    for spec in specs {
        for (line, col) in spec.compute(train)?.into_iter().enumerate() {
            let vals: Vec<f64> = col.output.values.iter().flatten().copied().collect();
            let n = vals.len().max(1) as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            out.push(InputColumn { spec: spec.clone(), line, mean, std });
        }
    }
    Ok(out)
}

/// Distinct specs in first-appearance order.
fn distinct_specs(inputs: &[InputColumn]) -> Vec<IndicatorSpec> {
    let mut specs: Vec<IndicatorSpec> = Vec::new();
    for c in inputs {
        if !specs.contains(&c.spec) {
            specs.push(c.spec.clone());
        }
    }
    specs
}

/// Streams the input features bar by bar; `None` until every input is defined.
#[derive(Debug, Clone)]
struct FeatureStream {
    streams: Vec<IndicatorStream>,
    /// For each input: (index into `streams`, line).
    lookup: Vec<(usize, usize)>,
    row: Vec<Vec<Option<f64>>>,
}

impl FeatureStream {
    fn new(inputs: &[InputColumn]) -> Self {
        let specs = distinct_specs(inputs);
        let lookup = inputs.iter().map(|c| (specs.iter().position(|s| *s == c.spec).unwrap(), c.line)).collect();
        Self { streams: specs.iter().map(IndicatorSpec::stream).collect(), lookup, row: vec![Vec::new(); specs.len()] }
    }

    fn update(&mut self, bar: &Candle, inputs: &[InputColumn]) -> Option<Vec<f64>> {
        for (s, row) in self.streams.iter_mut().zip(&mut self.row) {
            row.clear();
            s.update(bar, row);
        }
        self.lookup.iter().zip(inputs).map(|(&(s, line), col)| self.row[s][line].map(|v| col.normalize(v))).collect()
    }
}

/// Normalised feature rows for every bar of `candles`.
pub fn feature_matrix(inputs: &[InputColumn], candles: &[Candle]) -> Vec<Option<Vec<f64>>> {
    let mut fs = FeatureStream::new(inputs);
    candles.iter().map(|c| fs.update(c, inputs)).collect()
}

enum Features {
    Streaming(Box<FeatureStream>),
    /// Rows computed ahead of time from the same streams; row `t` depends on bars `..=t` only.
    Precomputed(Arc<Vec<Option<Vec<f64>>>>),
}

/// Long-only strategy driven by a network: per bar, the argmax of the
/// outputs (open, close, hold) decides. Ties resolve to hold.
pub struct NetworkStrategy {
    inputs: Vec<InputColumn>,
    network: Network,
    features: Features,
    latest: Option<Vec<f64>>,
    cursor: Cursor,
    warmup: usize,
}

impl NetworkStrategy {
    pub fn new(model: NetworkModel) -> Result<Self, StrategyError> {
        let fs = FeatureStream::new(&model.inputs);
        Self::build(model, Features::Streaming(Box::new(fs)))
    }

    /// Uses feature rows from [`feature_matrix`] over the series it will be stepped on.
    pub fn with_features(model: NetworkModel, rows: Arc<Vec<Option<Vec<f64>>>>) -> Result<Self, StrategyError> {
        Self::build(model, Features::Precomputed(rows))
    }

    fn build(model: NetworkModel, features: Features) -> Result<Self, StrategyError> {
        let network = model.genome.compile().map_err(|e| StrategyError::Model(e.to_string()))?;
        if network.input_count() != model.inputs.len() || network.output_count() != OUTPUTS {
            return Err(StrategyError::Model(format!(
                "genome has {} inputs and {} outputs, expected {} and {OUTPUTS}",
                network.input_count(),
                network.output_count(),
                model.inputs.len()
            )));
        }
        let warmup = model.inputs.iter().map(|c| c.spec.warmup()).max().unwrap_or(0) + 1;
        Ok(Self { inputs: model.inputs, network, features, latest: None, cursor: Cursor::default(), warmup })
    }
}

impl Strategy for NetworkStrategy {
    fn warmup(&self) -> usize {
        self.warmup
    }

    fn overlays(&self) -> Vec<IndicatorSpec> {
        distinct_specs(&self.inputs)
    }

    fn step(&mut self, legs: &[Leg<'_>], book: &dyn PositionBook) -> Result<StepOutput, StrategyError> {
        expect_legs(legs, 1)?;
        let leg = legs[0];
        let range = self.cursor.advance(leg.bars.len())?;
        match &mut self.features {
            Features::Streaming(fs) => {
                for i in range {
                    self.latest = fs.update(&leg.bars[i], &self.inputs);
                }
            }
            Features::Precomputed(rows) => {
                if let Some(i) = range.last() {
                    self.latest = rows.get(i).cloned().flatten();
                }
            }
        }
        let Some(x) = &self.latest else {
            return Ok(StepOutput::warming_up());
        };
        let y = self.network.activate(x).map_err(|e| StrategyError::Model(e.to_string()))?;
        let open = y[OUT_OPEN];
        let close = y[OUT_CLOSE];
        let hold = y[2];
        let holding = book.lot(leg.symbol, 0).is_some();
        let mut out = StepOutput::default();
        if open > close && open > hold && !holding {
            out.opens.push(TradeIntent::new(Side::OpenLong, leg.symbol, Size::Fraction(1.0), "network-open"));
        } else if close > open && close > hold && holding {
            out.closes.push(TradeIntent::new(Side::CloseLong, leg.symbol, Size::Fraction(1.0), "network-close"));
        }
        Ok(out)
    }
}

impl NetworkModel {
    /// Line-oriented text form:
    ///
    /// ```text
    /// cognitrade-genome 1
    /// input <index> <line> <mean> <std> <spec-json>
    /// node <id> <input|bias|hidden|output>
    /// conn <innovation> <from> <to> <weight> <1|0>
    /// fitness <value>
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{FILE_HEADER}").unwrap();
        for (i, c) in self.inputs.iter().enumerate() {
            let spec = serde_json::to_string(&c.spec).expect("specs serialize");
            writeln!(s, "input {i} {} {:?} {:?} {spec}", c.line, c.mean, c.std).unwrap();
        }
        for n in &self.genome.nodes {
            let kind = match n.kind {
                NodeKind::Input => "input",
                NodeKind::Bias => "bias",
                NodeKind::Hidden => "hidden",
                NodeKind::Output => "output",
            };
            writeln!(s, "node {} {kind}", n.id).unwrap();
        }
        for c in &self.genome.connections {
            writeln!(s, "conn {} {} {} {:?} {}", c.innovation, c.from, c.to, c.weight, u8::from(c.enabled)).unwrap();
        }
        if let Some(f) = self.genome.fitness {
            writeln!(s, "fitness {f:?}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, EvolutionError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, FILE_HEADER)) => {}
            Some((line, _)) => return Err(EvolutionError::Parse { line, reason: "missing header".into() }),
            None => return Err(EvolutionError::Parse { line: 1, reason: "empty genome file".into() }),
        }
        let mut inputs = Vec::new();
        let mut genome = Genome { nodes: Vec::new(), connections: Vec::new(), fitness: None };
        for (line, l) in lines {
            let err = |reason: &str| EvolutionError::Parse { line, reason: reason.to_string() };
            let mut parts = l.splitn(6, ' ');
            let tag = parts.next().unwrap_or_default();
            let mut field = |name: &str| parts.next().ok_or_else(|| err(&format!("missing {name}")));
            match tag {
                "input" => {
                    let index: usize = parse(field("index")?, line)?;
                    if index != inputs.len() {
                        return Err(err("input lines must be numbered in order"));
                    }
                    let col_line = parse(field("line")?, line)?;
                    let mean = parse(field("mean")?, line)?;
                    let std = parse(field("std")?, line)?;
                    let spec: IndicatorSpec =
                        serde_json::from_str(field("spec")?).map_err(|e| err(&format!("bad spec: {e}")))?;
                    spec.validate()?;
                    if col_line >= spec.width() {
                        return Err(err("line index exceeds indicator width"));
                    }
                    inputs.push(InputColumn { spec, line: col_line, mean, std });
                }
                "node" => {
                    let id = parse(field("id")?, line)?;
                    let kind = match field("kind")? {
                        "input" => NodeKind::Input,
                        "bias" => NodeKind::Bias,
                        "hidden" => NodeKind::Hidden,
                        "output" => NodeKind::Output,
                        _ => return Err(err("unknown node kind")),
                    };
                    genome.nodes.push(NodeGene::new(id, kind));
                }
                "conn" => {
                    let innovation = parse(field("innovation")?, line)?;
                    let from = parse(field("from")?, line)?;
                    let to = parse(field("to")?, line)?;
                    let weight = parse(field("weight")?, line)?;
                    let enabled = match field("enabled")? {
                        "1" => true,
                        "0" => false,
                        _ => return Err(err("enabled flag must be 1 or 0")),
                    };
                    genome.connections.push(ConnectionGene { innovation, from, to, weight, enabled });
                }
                "fitness" => genome.fitness = Some(parse(field("value")?, line)?),
                _ => return Err(err("unknown record")),
            }
        }
        genome.validate()?;
        if genome.input_count() != inputs.len() {
            return Err(EvolutionError::InvalidGenome("input lines do not match input nodes".into()));
        }
        Ok(Self { inputs, genome })
    }

    pub fn save(&self, path: &Path) -> Result<(), EvolutionError> {
        crate::market_data::write_atomic(path, self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EvolutionError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| EvolutionError::Io { path: path.to_path_buf(), source })?;
        Self::from_text(&text)
    }
}

fn parse<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, EvolutionError> {
    s.parse().map_err(|_| EvolutionError::Parse { line, reason: format!("cannot parse `{s}`") })
}

/// Result of evolving a trading network.
#[derive(Debug, Clone)]
pub struct EvolvedStrategy {
    pub model: NetworkModel,
    pub run: EvolutionRun,
}

/// Evolves a network whose fitness is the backtest score on `train`.
pub fn evolve_strategy(
    train: &CandleSeries,
    specs: &[IndicatorSpec],
    config: &EvolutionConfig,
    settings: &BacktestSettings,
) -> Result<EvolvedStrategy, EvolutionError> {
    if specs.is_empty() {
        return Err(EvolutionError::InvalidConfig("at least one indicator input is required".into()));
    }
    settings.validate()?;
    let inputs = input_columns(specs, train.candles())?;
    let rows = Arc::new(feature_matrix(&inputs, train.candles()));
    let data = std::slice::from_ref(train);
    let fitness = |g: &Genome| -> f64 {
        let model = NetworkModel { inputs: inputs.clone(), genome: g.clone() };
        let result = NetworkStrategy::with_features(model, Arc::clone(&rows))
            .map_err(EvolutionError::from)
            .and_then(|mut s| run_strategy(&mut s, None, data, settings).map_err(EvolutionError::from));
        match result {
            Ok(report) => report.score,
            Err(e) => {
                log::warn!("fitness evaluation failed: {e}");
                f64::NAN
            }
        }
    };
    let run = evolve(inputs.len(), OUTPUTS, config, fitness)?;
    Ok(EvolvedStrategy { model: NetworkModel { inputs, genome: run.best.clone() }, run })
}
