//! XOR surrogate fitness for NEAT sanity checks.

#![allow(dead_code)]

use cognitrade::evolution::{activate, evolve, EvolutionConfig, EvolutionRun, Genome};

pub const THRESHOLD: f64 = 3.9;
pub const CASES: [([f64; 2], f64); 4] = [([0.0, 0.0], 0.0), ([0.0, 1.0], 1.0), ([1.0, 0.0], 1.0), ([1.0, 1.0], 0.0)];

/// 4 minus the summed squared error over the truth table.
pub fn fitness(g: &Genome) -> f64 {
    let net = g.compile().expect("acyclic genome");
    4.0 - CASES
        .iter()
        .map(|(x, y)| {
            let out = net.activate(x).expect("two inputs")[0];
            (out - y) * (out - y)
        })
        .sum::<f64>()
}

/// Independent check that `g` solves XOR at the threshold.
pub fn solves(g: &Genome) -> bool {
    let sse: f64 = CASES.iter().map(|(x, y)| (activate(g, x).unwrap()[0] - y).powi(2)).sum();
    4.0 - sse >= THRESHOLD
}

pub fn run(seed: u64, max_generations: usize) -> EvolutionRun {
    let cfg =
        EvolutionConfig { seed, max_generations, fitness_threshold: Some(THRESHOLD), ..EvolutionConfig::default() };
    evolve(2, 1, &cfg, fitness).expect("valid config")
}
