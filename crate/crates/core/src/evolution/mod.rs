//! NEAT neuroevolution of trading networks and parameter tuning.

mod genome;
mod network;
mod population;
mod tuner;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::BacktestError;
use crate::indicators::IndicatorError;
use crate::market_data::DataError;
use crate::strategy::StrategyError;

pub use genome::{
    activate, compatibility_distance, crossover, mutate, Activation, ConnectionGene, Genome, InnovationRegistry,
    MutationOutcome, Network, NodeGene, NodeKind, INHERIT_DISABLED, SIGMOID_SLOPE,
};
pub use network::{
    evolve_strategy, feature_matrix, input_columns, EvolvedStrategy, InputColumn, NetworkModel, NetworkStrategy,
    OUTPUTS,
};
pub use population::{
    apportion, assign_species, evolve, genome_rng, EvolutionRun, GenerationStats, Population, Species,
};
pub use tuner::{tune_parameters, Axis, GaSettings, LeaderboardEntry, Params, SearchSpace, TuneResult};

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("invalid genome: {0}")]
    InvalidGenome(String),
    #[error("genome contains a cycle")]
    CyclicGenome,
    #[error("network expects {expected} inputs, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("crossover and selection need evaluated genomes")]
    UnevaluatedParent,
    #[error("search space has no valid candidate")]
    EmptySearchSpace,
    #[error("genome file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Indicator(#[from] IndicatorError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// NEAT hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub compatibility_threshold: f64,
    /// Chance that a genome's weights are mutated at all.
    pub weight_mutation_rate: f64,
    /// Per-connection chance of a fresh random weight instead of a perturbation.
    pub weight_reset_rate: f64,
    /// Perturbations are uniform in `±weight_step`.
    pub weight_step: f64,
    /// New and reset weights are uniform in `±weight_init_scale`.
    pub weight_init_scale: f64,
    pub weight_limit: f64,
    pub add_connection_rate: f64,
    pub add_node_rate: f64,
    pub crossover_rate: f64,
    pub elitism: usize,
    /// Share of each species (best first) allowed to reproduce.
    pub survival_fraction: f64,
    pub staleness_limit: usize,
    pub max_generations: usize,
    /// Stop as soon as a genome reaches this fitness.
    pub fitness_threshold: Option<f64>,
    /// Fitness of genomes with unreachable outputs or non-finite scores.
    pub penalty_fitness: f64,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 150,
            c1: 1.0,
            c2: 1.0,
            c3: 0.4,
            compatibility_threshold: 3.0,
            weight_mutation_rate: 0.8,
            weight_reset_rate: 0.1,
            weight_step: 0.5,
            weight_init_scale: 1.0,
            weight_limit: 8.0,
            add_connection_rate: 0.05,
            add_node_rate: 0.03,
            crossover_rate: 0.75,
            elitism: 1,
            survival_fraction: 0.2,
            staleness_limit: 15,
            max_generations: 100,
            fitness_threshold: None,
            penalty_fitness: -1000.0,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: &str| Err(EvolutionError::InvalidConfig(m.to_string()));
        if self.population_size < 2 {
            return bad("population size must be >= 2");
        }
        if self.elitism >= self.population_size {
            return bad("elitism must be smaller than the population");
        }
        let rates = [
            self.weight_mutation_rate,
            self.weight_reset_rate,
            self.add_connection_rate,
            self.add_node_rate,
            self.crossover_rate,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("rates must lie in [0, 1]");
        }
        if !(self.survival_fraction > 0.0 && self.survival_fraction <= 1.0) {
            return bad("survival fraction must lie in (0, 1]");
        }
        let nonneg = [self.c1, self.c2, self.c3, self.weight_step, self.weight_init_scale];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("coefficients and weight scales must be finite and >= 0");
        }
        if !(self.compatibility_threshold > 0.0 && self.weight_limit > 0.0 && self.penalty_fitness.is_finite()) {
            return bad("threshold and weight limit must be > 0, penalty finite");
        }
        Ok(())
    }
}
