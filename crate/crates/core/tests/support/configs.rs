//! Random strategy configurations paired with data they can run on.

#![allow(dead_code)]

use cognitrade::market_data::ParseOptions;
use cognitrade::strategy::{StopConfig, StrategyConfig, StrategyKind};
use cognitrade::{Candle, CandleSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fixtures::random_walk_candles;

/// Two co-moving series: B tracks half of A with multiplicative noise.
pub fn pair_series(rng: &mut impl Rng, len: usize) -> Vec<CandleSeries> {
    let a = random_walk_candles(rng, len, 100.0, 0.02);
    let b: Vec<Candle> = a
        .iter()
        .map(|c| {
            let f = 0.5 * (1.0 + rng.gen_range(-0.01..0.01));
            Candle::new(c.timestamp, c.open * f, c.high * f, c.low * f, c.close * f, c.volume)
        })
        .collect();
    vec![
        CandleSeries::new("AAA", 60, a, ParseOptions::default()).unwrap(),
        CandleSeries::new("BBB", 60, b, ParseOptions::default()).unwrap(),
    ]
}

pub fn random_stops(rng: &mut impl Rng) -> Option<StopConfig> {
    rng.gen_bool(0.5).then(|| StopConfig {
        atr_period: rng.gen_range(3..20),
        sl_mult: rng.gen_range(0.5..3.0),
        tp_mult: rng.gen_range(1.0..5.0),
        ..StopConfig::default()
    })
}

/// A random non-network config and matching data of `len` bars.
pub fn random_case(seed: u64, len: usize) -> (StrategyConfig, Vec<CandleSeries>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = match rng.gen_range(0..4) {
        0 => {
            let p_short = rng.gen_range(2..15);
            StrategyKind::EmaCross { p_short, p_long: rng.gen_range(p_short + 1..45) }
        }
        1 => StrategyKind::Grid { spacing: rng.gen_range(0.5..4.0), levels: rng.gen_range(1..6), anchor: None },
        2 => {
            let z_in = rng.gen_range(0.8..2.5);
            StrategyKind::Pairs { lookback: rng.gen_range(5..40), z_in, z_out: rng.gen_range(0.0..0.5) * z_in }
        }
        _ => StrategyKind::Hold,
    };
    let data = match kind {
        StrategyKind::Pairs { .. } => pair_series(&mut rng, len),
        _ => {
            let candles = random_walk_candles(&mut rng, len, 100.0, 0.02);
            vec![CandleSeries::new("RND", 60, candles, ParseOptions::default()).unwrap()]
        }
    };
    let config = StrategyConfig { kind, stops: random_stops(&mut rng) };
    (config, data)
}

/// A network strategy with a random evolved-looking genome, saved under `dir`.
pub fn random_network_case(seed: u64, len: usize, dir: &std::path::Path) -> (StrategyConfig, Vec<CandleSeries>) {
    use cognitrade::evolution::{
        input_columns, mutate, EvolutionConfig, Genome, InnovationRegistry, NetworkModel, OUTPUTS,
    };
    use cognitrade::indicators::IndicatorSpec;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candles = random_walk_candles(&mut rng, len, 100.0, 0.02);
    let pool = [
        "rsi:period=7",
        "ema:period=5",
        "momentum:period=3",
        "macd:fast=6,slow=13,signal=5",
        "bollinger:period=10,k=2",
        "obv",
    ];
    let specs: Vec<IndicatorSpec> = pool.iter().filter(|_| rng.gen_bool(0.6)).map(|s| s.parse().unwrap()).collect();
    let specs = if specs.is_empty() { vec!["rsi:period=7".parse().unwrap()] } else { specs };
    let inputs = input_columns(&specs, &candles).unwrap();
    let cfg = EvolutionConfig { add_node_rate: 0.5, add_connection_rate: 0.5, ..EvolutionConfig::default() };
    let mut genome = Genome::fully_connected(inputs.len(), OUTPUTS, 2.0, &mut rng);
    let mut registry = InnovationRegistry::for_layout(inputs.len(), OUTPUTS);
    for _ in 0..rng.gen_range(0..6) {
        mutate(&mut genome, &cfg, &mut registry, &mut rng);
    }
    let path = dir.join(format!("net-{seed}.genome"));
    NetworkModel { inputs, genome }.save(&path).unwrap();
    let config = StrategyConfig { kind: StrategyKind::Network { genome_file: path }, stops: random_stops(&mut rng) };
    (config, vec![CandleSeries::new("RND", 60, candles, ParseOptions::default()).unwrap()])
}
