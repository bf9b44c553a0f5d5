//! The five subcommands. Each one sequences library calls and writes files;
//! the returned string is the human-readable summary for stdout.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cognitrade::backtest::{run_backtest, BacktestReport, OrderStatus};
use cognitrade::broker::{paper_trade_loop, SessionOptions, SimulatedBroker};
use cognitrade::evolution::{evolve_strategy, tune_parameters};
use cognitrade::indicators::{compute, IndicatorSpec};
use cognitrade::market_data::{parse_csv, slice_window, ParseOptions, Warehouse};
use cognitrade::strategy::PositionSide;
use cognitrade::CandleSeries;

use crate::config::{OptimizeMode, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{num, opt, tag, write_atomic, write_json, Csv};

pub const REPORT_FILE: &str = "report.json";
pub const EQUITY_FILE: &str = "equity.csv";
pub const SIGNALS_FILE: &str = "signals.csv";
pub const INDICATORS_FILE: &str = "indicators.csv";
pub const LEADERBOARD_FILE: &str = "leaderboard.csv";
pub const BEST_PARAMS_FILE: &str = "best_params.json";
pub const HISTORY_FILE: &str = "fitness_history.csv";
pub const GENOME_FILE: &str = "best.genome";
pub const CANDLES_FILE: &str = "candles.csv";
pub const OVERLAYS_FILE: &str = "overlays.csv";
pub const MARKERS_FILE: &str = "markers.csv";

pub struct IngestRequest {
    pub input: PathBuf,
    pub warehouse: PathBuf,
    pub symbol: String,
    pub interval: u64,
    pub allow_gaps: bool,
}

/// Parses the whole input before touching the warehouse.
pub fn ingest(req: &IngestRequest) -> Result<String> {
    let series = parse_csv(&req.input, &req.symbol, req.interval, ParseOptions { allow_gaps: req.allow_gaps })?;
    let source = req.input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let warehouse = Warehouse::new(&req.warehouse);
    let meta = warehouse.store(&series, &source)?;
    Ok(format!(
        "ingested {} bars of {} @ {}s into {}{}\n",
        meta.bar_count,
        meta.symbol,
        meta.interval,
        warehouse.series_path(&req.symbol, req.interval).display(),
        if meta.gapped { " (gapped)" } else { "" }
    ))
}

/// Loads every configured leg, cut to the configured window.
pub fn load_data(cfg: &RunConfig) -> Result<Vec<CandleSeries>> {
    let warehouse = Warehouse::new(&cfg.data.warehouse);
    cfg.data
        .symbols
        .iter()
        .map(|symbol| {
            let series = warehouse.load(symbol, cfg.data.interval)?;
            Ok(match (cfg.data.from, cfg.data.to) {
                (None, None) => series,
                (from, to) => slice_window(&series, from.unwrap_or(i64::MIN), to.unwrap_or(i64::MAX))?,
            })
        })
        .collect()
}

pub fn indicator(cfg: &RunConfig, specs: &[IndicatorSpec], symbol: Option<&str>) -> Result<String> {
    if specs.is_empty() {
        return Err(CliError::Arguments("no indicators: pass --spec or set [indicators] specs".into()));
    }
    let data = load_data(cfg)?;
    let series = match symbol {
        Some(s) => data
            .iter()
            .find(|d| d.symbol() == s)
            .ok_or_else(|| CliError::Arguments(format!("symbol {s} is not in the data section")))?,
        None => &data[0],
    };
    let csv = overlay_csv(series, specs)?;
    let path = cfg.out.join(INDICATORS_FILE);
    csv.write(&path)?;
    Ok(format!("wrote {} indicator(s) over {} bars to {}\n", specs.len(), series.len(), path.display()))
}

/// `timestamp` plus one column per indicator output line.
fn overlay_csv(series: &CandleSeries, specs: &[IndicatorSpec]) -> Result<Csv> {
    let mut columns = Vec::new();
    for spec in specs {
        columns.extend(compute(spec, series.candles())?);
    }
    let mut header = vec!["timestamp".to_string()];
    header.extend(columns.iter().map(|c| c.name.clone()));
    let mut csv = Csv::new(&header);
    for (i, candle) in series.candles().iter().enumerate() {
        let mut row = vec![candle.timestamp.to_string()];
        row.extend(columns.iter().map(|c| opt(c.output.get(i))));
        csv.row(row);
    }
    Ok(csv)
}

pub fn backtest(cfg: &RunConfig, paper: bool) -> Result<String> {
    let data = load_data(cfg)?;
    let report = if paper {
        let mut broker = SimulatedBroker::new(data, &cfg.costs)?;
        paper_trade_loop(&cfg.strategy, &mut broker, &cfg.costs, &SessionOptions::default())?.report
    } else {
        run_backtest(&cfg.strategy, &data, &cfg.costs)?
    };
    write_json(&cfg.out.join(REPORT_FILE), &report)?;
    equity_csv(&report).write(&cfg.out.join(EQUITY_FILE))?;
    signals_csv(&report).write(&cfg.out.join(SIGNALS_FILE))?;
    Ok(metrics_summary(&report))
}

pub fn equity_csv(report: &BacktestReport) -> Csv {
    let mut csv = Csv::new(&["timestamp", "cash", "equity"]);
    for p in &report.equity {
        csv.row(vec![p.timestamp.to_string(), num(p.cash), num(p.equity)]);
    }
    csv
}

/// One row per order; fill columns are empty unless it filled.
pub fn signals_csv(report: &BacktestReport) -> Csv {
    let mut csv = Csv::new(&[
        "order_id",
        "bar",
        "symbol",
        "slot",
        "side",
        "reason",
        "status",
        "rejection",
        "fill_bar",
        "fill_timestamp",
        "price",
        "quantity",
        "fee",
    ]);
    for o in &report.orders {
        let fill = report.fills.iter().find(|f| f.order_id == o.id && o.status == OrderStatus::Filled);
        let f = |g: &dyn Fn(&cognitrade::backtest::Fill) -> String| fill.map(g).unwrap_or_default();
        csv.row(vec![
            o.id.to_string(),
            o.created_at_bar.to_string(),
            o.intent.symbol.clone(),
            o.intent.slot.to_string(),
            tag(&o.intent.side),
            o.intent.reason.replace(',', ";"),
            tag(&o.status),
            o.rejection.as_ref().map(tag).unwrap_or_default(),
            f(&|x| x.bar.to_string()),
            f(&|x| x.timestamp.to_string()),
            f(&|x| num(x.price)),
            f(&|x| num(x.quantity)),
            f(&|x| num(x.fee)),
        ]);
    }
    csv
}

pub fn metrics_summary(report: &BacktestReport) -> String {
    let m = &report.metrics;
    let mut s = String::new();
    let _ = writeln!(s, "symbols          {}", report.symbols.join(","));
    let _ = writeln!(s, "trades           {}", m.trade_count);
    let _ = writeln!(s, "net profit %     {:.4}", m.net_profit_pct);
    let _ = writeln!(s, "max drawdown %   {:.4}", m.max_drawdown_pct);
    let _ = writeln!(s, "win rate         {:.4}", m.win_rate);
    let _ = writeln!(s, "fees paid        {:.4}", report.fees_paid);
    let _ = writeln!(s, "final equity     {:.4}", m.final_equity);
    let _ = writeln!(s, "score            {:.4}", report.score);
    s
}

pub fn optimize(cfg: &RunConfig, mode: Option<OptimizeMode>) -> Result<String> {
    let section =
        cfg.optimize.as_ref().ok_or_else(|| CliError::Arguments("config has no [optimize] section".into()))?;
    let data = load_data(cfg)?;
    match mode.unwrap_or(section.mode) {
        OptimizeMode::Tune => {
            let space = section
                .tune
                .as_ref()
                .ok_or_else(|| CliError::Arguments("tune mode needs an [optimize.tune] section".into()))?;
            let result = tune_parameters(&cfg.strategy, space, &data, &cfg.costs, cfg.seed)?;
            let names: Vec<String> = result.best.params.iter().map(|(n, _)| n.clone()).collect();
            let mut header = vec!["rank".to_string()];
            header.extend(names.iter().cloned());
            header.extend(
                ["score", "net_profit_pct", "max_drawdown_pct", "win_rate", "trade_count", "final_equity"]
                    .map(String::from),
            );
            let mut csv = Csv::new(&header);
            for (rank, e) in result.leaderboard.iter().enumerate() {
                let mut row = vec![(rank + 1).to_string()];
                row.extend(e.params.iter().map(|(_, v)| num(*v)));
                let m = &e.metrics;
                row.extend([
                    num(e.score),
                    num(m.net_profit_pct),
                    num(m.max_drawdown_pct),
                    num(m.win_rate),
                    m.trade_count.to_string(),
                    num(m.final_equity),
                ]);
                csv.row(row);
            }
            csv.write(&cfg.out.join(LEADERBOARD_FILE))?;
            let best_strategy = cfg.strategy.with_params(&result.best.params)?;
            let params: serde_json::Map<String, serde_json::Value> =
                result.best.params.iter().map(|(n, v)| (n.clone(), serde_json::Value::from(*v))).collect();
            let best = serde_json::json!({
                "params": params,
                "score": result.best.score,
                "metrics": result.best.metrics,
                "strategy": best_strategy,
            });
            write_json(&cfg.out.join(BEST_PARAMS_FILE), &best)?;
            let shown: Vec<String> = result.best.params.iter().map(|(n, v)| format!("{n}={v}")).collect();
            Ok(format!(
                "evaluated {} candidate(s), skipped {}\nbest {} score {:.4}\n",
                result.leaderboard.len(),
                result.skipped,
                shown.join(" "),
                result.best.score
            ))
        }
        OptimizeMode::Evolve => {
            let ev = section
                .evolve
                .as_ref()
                .ok_or_else(|| CliError::Arguments("evolve mode needs an [optimize.evolve] section".into()))?;
            if data.len() != 1 {
                return Err(CliError::Arguments("evolve trains a single-symbol network".into()));
            }
            let neat = cognitrade::evolution::EvolutionConfig { seed: cfg.seed, ..ev.neat.clone() };
            let evolved = evolve_strategy(&data[0], &ev.inputs, &neat, &cfg.costs)?;
            let mut csv = Csv::new(&["generation", "best_fitness", "mean_fitness", "species", "reseeded"]);
            for g in &evolved.run.history {
                csv.row(vec![
                    g.generation.to_string(),
                    num(g.best_fitness),
                    num(g.mean_fitness),
                    g.species.to_string(),
                    g.reseeded.to_string(),
                ]);
            }
            csv.write(&cfg.out.join(HISTORY_FILE))?;
            write_atomic(&cfg.out.join(GENOME_FILE), evolved.model.to_text().as_bytes())?;
            let best = evolved.run.history.iter().map(|g| g.best_fitness).fold(f64::NEG_INFINITY, f64::max);
            Ok(format!(
                "evolved {} generation(s); best fitness {:.4}; genome in {}\n",
                evolved.run.history.len(),
                best,
                cfg.out.join(GENOME_FILE).display()
            ))
        }
    }
}

/// Plot-ready projections of a saved report.
pub fn report(cfg: &RunConfig, report_path: Option<&Path>) -> Result<String> {
    let path = report_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.out.join(REPORT_FILE));
    let text = std::fs::read_to_string(&path).map_err(|_| CliError::MissingReport(path.clone()))?;
    let report: BacktestReport =
        serde_json::from_str(&text).map_err(|source| CliError::MalformedReport { path: path.clone(), source })?;
    let data = load_data(cfg)?;

    let mut candles = Csv::new(&["symbol", "timestamp", "open", "high", "low", "close", "volume"]);
    for series in &data {
        for c in series.candles() {
            candles.row(vec![
                series.symbol().to_string(),
                c.timestamp.to_string(),
                num(c.open),
                num(c.high),
                num(c.low),
                num(c.close),
                num(c.volume),
            ]);
        }
    }
    candles.write(&cfg.out.join(CANDLES_FILE))?;

    let specs =
        if cfg.indicators.specs.is_empty() { cfg.strategy.build()?.overlays() } else { cfg.indicators.specs.clone() };
    overlay_csv(&data[0], &specs)?.write(&cfg.out.join(OVERLAYS_FILE))?;

    let markers = markers_csv(&report);
    markers.write(&cfg.out.join(MARKERS_FILE))?;
    Ok(format!(
        "wrote {} candle rows, {} overlay indicator(s), {} markers to {}\n",
        data.iter().map(CandleSeries::len).sum::<usize>(),
        specs.len(),
        2 * report.trades.len(),
        cfg.out.display()
    ))
}

/// Entry and exit of every trade, in trade order.
pub fn markers_csv(report: &BacktestReport) -> Csv {
    let mut csv = Csv::new(&["timestamp", "bar", "symbol", "slot", "marker", "event", "price", "quantity"]);
    for t in &report.trades {
        let long = t.side == PositionSide::Long;
        for (fill, event, buy) in [(&t.entry, "entry", long), (&t.exit, "exit", !long)] {
            csv.row(vec![
                fill.timestamp.to_string(),
                fill.bar.to_string(),
                fill.symbol.clone(),
                fill.slot.to_string(),
                if buy { "buy" } else { "sell" }.to_string(),
                event.to_string(),
                num(fill.price),
                num(fill.quantity),
            ]);
        }
    }
    csv
}
