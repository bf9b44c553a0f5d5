//! Parameter search over strategy configs: exhaustive grid, explicit
//! candidate list, or a small genetic algorithm over grid axes.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{run_backtest, BacktestSettings, Metrics};
use crate::market_data::CandleSeries;
use crate::strategy::StrategyConfig;

use super::population::genome_rng;
use super::EvolutionError;

pub type Params = Vec<(String, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// `start, start+step, ...` up to and including `stop` (within rounding).
    pub fn range(name: impl Into<String>, start: f64, stop: f64, step: f64) -> Self {
        let mut values = Vec::new();
        if step > 0.0 {
            let n = ((stop - start) / step + 1e-9).floor();
            if n >= 0.0 {
                values = (0..=n as usize).map(|i| start + i as f64 * step).collect();
            }
        }
        Self { name: name.into(), values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub mutation_rate: f64,
    pub tournament: usize,
}

impl Default for GaSettings {
    fn default() -> Self {
        Self { population: 20, generations: 10, mutation_rate: 0.2, tournament: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum SearchSpace {
    /// Cartesian product of the axes, first axis outermost.
    Grid { axes: Vec<Axis> },
    /// Explicit parameter sets, evaluated in order.
    Candidates { candidates: Vec<BTreeMap<String, f64>> },
    /// Genetic search over the grid spanned by the axes.
    Genetic {
        axes: Vec<Axis>,
        #[serde(default)]
        ga: GaSettings,
    },
}

impl SearchSpace {
    /// Every point of a grid, in enumeration order.
    fn grid_points(axes: &[Axis]) -> Vec<Params> {
        if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
            return Vec::new();
        }
        let mut out: Vec<Params> = vec![Vec::new()];
        for axis in axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push((axis.name.clone(), v));
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardEntry {
    pub params: Params,
    pub score: f64,
    pub metrics: Metrics,
    /// Position in evaluation order.
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub best: LeaderboardEntry,
    /// All valid candidates, by score descending then evaluation order.
    pub leaderboard: Vec<LeaderboardEntry>,
    /// Candidates whose parameters did not form a valid config.
    pub skipped: usize,
}

/// Backtests `base` with each candidate's overrides and ranks the results.
pub fn tune_parameters(
    base: &StrategyConfig,
    space: &SearchSpace,
    train: &[CandleSeries],
    settings: &BacktestSettings,
    seed: u64,
) -> Result<TuneResult, EvolutionError> {
    settings.validate()?;
    let mut entries: Vec<LeaderboardEntry> = Vec::new();
    let mut skipped = 0;
    match space {
        SearchSpace::Grid { axes } => {
            let points = SearchSpace::grid_points(axes);
            evaluate_batch(base, &points, train, settings, &mut entries, &mut skipped)?;
        }
        SearchSpace::Candidates { candidates } => {
            let points: Vec<Params> =
                candidates.iter().map(|c| c.iter().map(|(k, v)| (k.clone(), *v)).collect()).collect();
            evaluate_batch(base, &points, train, settings, &mut entries, &mut skipped)?;
        }
        SearchSpace::Genetic { axes, ga } => {
            genetic(base, axes, ga, train, settings, seed, &mut entries, &mut skipped)?
        }
    }
    if entries.is_empty() {
        return Err(EvolutionError::EmptySearchSpace);
    }
    // stable sort keeps evaluation order among equal scores
    entries.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(TuneResult { best: entries[0].clone(), leaderboard: entries, skipped })
}

/// Evaluates `points` in parallel and appends valid ones in input order.
fn evaluate_batch(
    base: &StrategyConfig,
    points: &[Params],
    train: &[CandleSeries],
    settings: &BacktestSettings,
    entries: &mut Vec<LeaderboardEntry>,
    skipped: &mut usize,
) -> Result<Vec<Option<f64>>, EvolutionError> {
    let results: Vec<Option<Result<(f64, Metrics), EvolutionError>>> = points
        .par_iter()
        .map(|p| {
            let cfg = match base.with_params(p) {
                Ok(cfg) => cfg,
                Err(e) => {
                    log::info!("skipping candidate {p:?}: {e}");
                    return None;
                }
            };
            Some(run_backtest(&cfg, train, settings).map(|r| (r.score, r.metrics)).map_err(EvolutionError::from))
        })
        .collect();
    let mut scores = Vec::with_capacity(points.len());
    for (p, r) in points.iter().zip(results) {
        match r {
            None => {
                *skipped += 1;
                scores.push(None);
            }
            Some(r) => {
                let (score, metrics) = r?;
                entries.push(LeaderboardEntry { params: p.clone(), score, metrics, evaluated: entries.len() });
                scores.push(Some(score));
            }
        }
    }
    Ok(scores)
}

#[allow(clippy::too_many_arguments)]
fn genetic(
    base: &StrategyConfig,
    axes: &[Axis],
    ga: &GaSettings,
    train: &[CandleSeries],
    settings: &BacktestSettings,
    seed: u64,
    entries: &mut Vec<LeaderboardEntry>,
    skipped: &mut usize,
) -> Result<(), EvolutionError> {
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) || ga.population == 0 {
        return Err(EvolutionError::EmptySearchSpace);
    }
    let to_params =
        |genes: &[usize]| -> Params { axes.iter().zip(genes).map(|(a, &i)| (a.name.clone(), a.values[i])).collect() };
    // fitness per gene vector; invalid candidates rank below everything
    let mut cache: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut rng = genome_rng(seed, 0, u32::MAX as usize);
    let mut pop: Vec<Vec<usize>> =
        (0..ga.population).map(|_| axes.iter().map(|a| rng.gen_range(0..a.values.len())).collect()).collect();
    for generation in 0..=ga.generations {
        let fresh: Vec<Vec<usize>> = {
            let mut seen = Vec::new();
            for g in &pop {
                if !cache.contains_key(g) && !seen.contains(g) {
                    seen.push(g.clone());
                }
            }
            seen
        };
        let points: Vec<Params> = fresh.iter().map(|g| to_params(g)).collect();
        let scores = evaluate_batch(base, &points, train, settings, entries, skipped)?;
        for (g, s) in fresh.into_iter().zip(scores) {
            cache.insert(g, s.unwrap_or(f64::NEG_INFINITY));
        }
        if generation == ga.generations {
            break;
        }
        let fit = |g: &Vec<usize>| cache[g];
        let mut rng = genome_rng(seed, generation + 1, u32::MAX as usize);
        let best = pop.iter().max_by(|a, b| fit(a).total_cmp(&fit(b))).cloned().expect("non-empty population");
        let mut next = vec![best];
        let tournament = ga.tournament.max(1);
        let pick = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<usize> {
            let mut winner = &pop[rng.gen_range(0..pop.len())];
            for _ in 1..tournament {
                let c = &pop[rng.gen_range(0..pop.len())];
                if fit(c) > fit(winner) {
                    winner = c;
                }
            }
            winner.clone()
        };
        while next.len() < ga.population {
            let a = pick(&mut rng);
            let b = pick(&mut rng);
            let mut child: Vec<usize> =
                a.iter().zip(&b).map(|(&x, &y)| if rng.gen_bool(0.5) { x } else { y }).collect();
            for (gene, axis) in child.iter_mut().zip(axes) {
                if rng.gen_bool(ga.mutation_rate.clamp(0.0, 1.0)) {
                    *gene = rng.gen_range(0..axis.values.len());
                }
            }
            next.push(child);
        }
        pop = next;
    }
    Ok(())
}
