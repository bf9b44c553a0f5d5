mod support;

use cognitrade::backtest::{run_backtest, BacktestReport, BacktestSettings, FORCE_CLOSE_REASON};
use cognitrade::strategy::{
    ema_crossover_signals, pairs_signals, trend_identify, CrossDirection, PairAction, Side, StrategyConfig,
    StrategyKind, Trend,
};
use cognitrade::CandleSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::configs::{pair_series, random_case, random_network_case};
use support::fixtures::{random_series, series_from_closes};
use support::oracles;

fn truncate(data: &[CandleSeries], len: usize) -> Vec<CandleSeries> {
    data.iter().map(|s| s.prefix(len)).collect()
}

fn intents_until(r: &BacktestReport, t: usize) -> Vec<String> {
    r.orders
        .iter()
        .filter(|o| o.created_at_bar <= t && o.intent.reason != FORCE_CLOSE_REASON)
        .map(|o| format!("{:?}", o.intent))
        .collect()
}

fn fills_until(r: &BacktestReport, t: usize) -> Vec<String> {
    r.fills.iter().filter(|f| f.bar <= t && !f.forced).map(|f| format!("{f:?}")).collect()
}

#[test]
fn future_bars_never_change_past_decisions() {
    let dir = tempfile::tempdir().unwrap();
    let settings = BacktestSettings::default();
    let mut active = [0usize; 2];
    for seed in 0..40 {
        let (config, data) =
            if seed % 4 == 3 { random_network_case(seed, 300, dir.path()) } else { random_case(seed, 300) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        let t = rng.gen_range(1..data[0].len() - 1);
        let full = run_backtest(&config, &data, &settings).unwrap();
        active[usize::from(seed % 4 == 3)] += usize::from(!full.fills.is_empty());
        let upto_t = run_backtest(&config, &truncate(&data, t + 1), &settings).unwrap();
        assert_eq!(intents_until(&full, t), intents_until(&upto_t, t), "seed {seed}: intents at <= {t}");
        let upto_next = run_backtest(&config, &truncate(&data, t + 2), &settings).unwrap();
        assert_eq!(fills_until(&full, t + 1), fills_until(&upto_next, t + 1), "seed {seed}: fills at <= {}", t + 1);
    }
    assert!(active[0] >= 15 && active[1] >= 5, "too few cases trade: {active:?}");
}

/// Crossings of two oracle EMA lines, on strict sign changes of short - long.
fn oracle_crossings(series: &CandleSeries, ps: usize, pl: usize) -> Vec<(usize, CrossDirection)> {
    let s = oracles::ema(series.candles(), ps);
    let l = oracles::ema(series.candles(), pl);
    let mut out = Vec::new();
    let mut prev: Option<f64> = None;
    for i in 0..s.len() {
        let (Some(a), Some(b)) = (s[i], l[i]) else { continue };
        let d = a - b;
        if let Some(p) = prev {
            if d > 0.0 && p <= 0.0 {
                out.push((i, CrossDirection::Buy));
            } else if d < 0.0 && p >= 0.0 {
                out.push((i, CrossDirection::Sell));
            }
        }
        prev = Some(d);
    }
    out
}

#[test]
fn crossover_signals_match_oracle() {
    for seed in 0..50 {
        let series = random_series(seed, 400);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps = rng.gen_range(2..12);
        let pl = rng.gen_range(ps + 1..40);
        let got = ema_crossover_signals(series.candles(), ps, pl).unwrap();
        assert_eq!(got, oracle_crossings(&series, ps, pl), "seed {seed} ({ps},{pl})");
    }
}

#[test]
fn ema_fills_alternate_entry_and_exit() {
    for seed in 0..20 {
        let data = vec![random_series(seed + 77, 500)];
        let r = run_backtest(&StrategyConfig::ema_cross(5, 20), &data, &BacktestSettings::default()).unwrap();
        for (i, f) in r.fills.iter().enumerate() {
            let expected = if i % 2 == 0 { Side::OpenLong } else { Side::CloseLong };
            assert_eq!(f.side, expected, "seed {seed} fill {i}");
        }
    }
}

#[test]
fn grid_exits_pair_with_entries_in_the_same_slot() {
    for seed in 0..20 {
        let data = vec![random_series(seed + 900, 800)];
        let config = StrategyConfig::new(StrategyKind::Grid { spacing: 1.5, levels: 4, anchor: None });
        let r = run_backtest(&config, &data, &BacktestSettings::default()).unwrap();
        let mut open = std::collections::BTreeMap::new();
        for f in &r.fills {
            assert!((1..=4).contains(&f.slot));
            match f.side {
                Side::OpenLong => assert!(open.insert(f.slot, f.bar).is_none(), "slot {} opened twice", f.slot),
                Side::CloseLong => assert!(open.remove(&f.slot).is_some(), "slot {} closed while flat", f.slot),
                _ => panic!("grid is long-only"),
            }
        }
        assert!(open.is_empty(), "force-close leaves nothing open");
        for tr in r.trades.iter().filter(|t| !t.forced) {
            assert!(tr.exit.bar > tr.entry.bar);
        }
    }
}

/// Threshold logic applied to z-scores computed from scratch per bar.
fn oracle_pairs(
    a: &CandleSeries,
    b: &CandleSeries,
    lookback: usize,
    z_in: f64,
    z_out: f64,
) -> Vec<(usize, PairAction)> {
    let spread: Vec<f64> = a.candles().iter().zip(b.candles()).map(|(x, y)| (x.close / y.close).ln()).collect();
    let z: Vec<Option<f64>> = (0..spread.len())
        .map(|i| {
            if i + 1 < lookback {
                return None;
            }
            let w = &spread[i + 1 - lookback..=i];
            let mean = w.iter().sum::<f64>() / lookback as f64;
            let sd = (w.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / lookback as f64).sqrt();
            (sd > 1e-9).then(|| (spread[i] - mean) / sd)
        })
        .collect();
    let mut out = Vec::new();
    let mut holding = false;
    for i in 1..z.len() {
        let Some(zi) = z[i] else { continue };
        if holding {
            if zi.abs() < z_out {
                holding = false;
                out.push((i, PairAction::Exit));
            }
        } else if let Some(zp) = z[i - 1] {
            if zp.abs() <= z_in && zi.abs() > z_in {
                holding = true;
                out.push((i, if zi > 0.0 { PairAction::ShortALongB } else { PairAction::LongAShortB }));
            }
        }
    }
    out
}

#[test]
fn pairs_signals_match_oracle() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = pair_series(&mut rng, 400);
        let lookback = rng.gen_range(5..50);
        let z_in = rng.gen_range(1.0..2.5);
        let z_out = rng.gen_range(0.0..0.9) * z_in;
        let got = pairs_signals(&data[0], &data[1], lookback, z_in, z_out).unwrap();
        let want = oracle_pairs(&data[0], &data[1], lookback, z_in, z_out);
        assert_eq!(got.len(), want.len(), "seed {seed}");
        for (g, w) in got.iter().zip(&want) {
            assert_eq!(g, w, "seed {seed}");
        }
    }
}

#[test]
fn trend_on_monotone_series() {
    let up: Vec<f64> = (0..120).map(|i| 100.0 + i as f64).collect();
    let labels = trend_identify(series_from_closes("U", &up).candles(), 5, 20, 14, 20.0).unwrap();
    assert_eq!(*labels.last().unwrap(), Trend::Bullish);
    let down: Vec<f64> = up.iter().rev().copied().collect();
    let labels = trend_identify(series_from_closes("D", &down).candles(), 5, 20, 14, 20.0).unwrap();
    assert_eq!(*labels.last().unwrap(), Trend::Bearish);
}
