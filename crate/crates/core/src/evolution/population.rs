use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::genome::{compatibility_distance, crossover, mutate, Genome, InnovationRegistry};
use super::{EvolutionConfig, EvolutionError};

/// RNG stream for one genome slot of one generation. Streams are independent
/// of evaluation order and thread count.
pub fn genome_rng(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub id: usize,
    pub representative: Genome,
    /// Indices into the current population.
    pub members: Vec<usize>,
    /// Generations since the species' best fitness last improved.
    pub staleness: usize,
    pub best_fitness: f64,
}

/// Species index for each genome: the first representative within the
/// threshold, otherwise a new species (numbered after `representatives`)
/// whose representative is that genome.
pub fn assign_species(genomes: &[Genome], representatives: &[Genome], config: &EvolutionConfig) -> Vec<usize> {
    let mut reps: Vec<&Genome> = representatives.iter().collect();
    genomes
        .iter()
        .map(|g| {
            match reps.iter().position(|r| compatibility_distance(g, r, config) < config.compatibility_threshold) {
                Some(i) => i,
                None => {
                    reps.push(g);
                    reps.len() - 1
                }
            }
        })
        .collect()
}

/// Splits `total` proportionally to `shares` with the largest-remainder
/// method (ties go to the lower index). Equal split when all shares are 0.
pub fn apportion(shares: &[f64], total: usize) -> Vec<usize> {
    if shares.is_empty() {
        return Vec::new();
    }
    let sum: f64 = shares.iter().sum();
    let shares: Vec<f64> = if sum > 0.0 && sum.is_finite() { shares.to_vec() } else { vec![1.0; shares.len()] };
    let sum: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| s / sum * total as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - quota.iter().sum::<usize>().min(total);
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        quota[i] += 1;
        left -= 1;
    }
    quota
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub species: usize,
    /// The previous transition found every species stale and reseeded.
    pub reseeded: bool,
}

#[derive(Debug, Clone)]
pub struct Population {
    pub genomes: Vec<Genome>,
    pub species: Vec<Species>,
    pub generation: usize,
    config: EvolutionConfig,
    registry: InnovationRegistry,
    next_species_id: usize,
    reseeded: bool,
}

impl Population {
    /// Fully connected genomes with random weights.
    pub fn new(inputs: usize, outputs: usize, config: &EvolutionConfig) -> Result<Self, EvolutionError> {
        config.validate()?;
        if outputs == 0 {
            return Err(EvolutionError::InvalidConfig("networks need at least one output".into()));
        }
        let genomes = (0..config.population_size)
            .map(|i| {
                Genome::fully_connected(inputs, outputs, config.weight_init_scale, &mut genome_rng(config.seed, 0, i))
            })
            .collect();
        Ok(Self::from_genomes(genomes, config))
    }

    pub fn from_genomes(genomes: Vec<Genome>, config: &EvolutionConfig) -> Self {
        let registry = InnovationRegistry::after(&genomes);
        Self {
            genomes,
            species: Vec::new(),
            generation: 0,
            config: config.clone(),
            registry,
            next_species_id: 0,
            reseeded: false,
        }
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    /// Scores every genome without a fitness. Genomes whose outputs cannot be
    /// reached, or whose score is not finite, get the penalty fitness.
    pub fn evaluate<F>(&mut self, fitness: &F)
    where
        F: Fn(&Genome) -> f64 + Sync,
    {
        let penalty = self.config.penalty_fitness;
        self.genomes.par_iter_mut().filter(|g| g.fitness.is_none()).for_each(|g| {
            let f = if g.outputs_reachable() { fitness(g) } else { penalty };
            g.fitness = Some(if f.is_finite() { f } else { penalty });
        });
    }

    fn fitness_of(&self, i: usize) -> Result<f64, EvolutionError> {
        self.genomes[i].fitness.ok_or(EvolutionError::UnevaluatedParent)
    }

    /// Index of the fittest genome (lowest index on ties).
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, g) in self.genomes.iter().enumerate() {
            if let Some(f) = g.fitness {
                if best.is_none_or(|(_, b)| f > b) {
                    best = Some((i, f));
                }
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn stats(&self) -> GenerationStats {
        let fits: Vec<f64> = self.genomes.iter().filter_map(|g| g.fitness).collect();
        GenerationStats {
            generation: self.generation,
            best_fitness: fits.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_fitness: fits.iter().sum::<f64>() / fits.len().max(1) as f64,
            species: self.species_count(),
            reseeded: self.reseeded,
        }
    }

    /// Number of species the current genomes fall into.
    pub fn species_count(&self) -> usize {
        let reps: Vec<Genome> = self.species.iter().map(|s| s.representative.clone()).collect();
        let mut ids = assign_species(&self.genomes, &reps, &self.config);
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    fn speciate(&mut self) {
        let reps: Vec<Genome> = self.species.iter().map(|s| s.representative.clone()).collect();
        let assignment = assign_species(&self.genomes, &reps, &self.config);
        for s in &mut self.species {
            s.members.clear();
        }
        for (i, &k) in assignment.iter().enumerate() {
            if k >= self.species.len() {
                self.species.push(Species {
                    id: self.next_species_id,
                    representative: self.genomes[i].clone(),
                    members: Vec::new(),
                    staleness: 0,
                    best_fitness: f64::NEG_INFINITY,
                });
                self.next_species_id += 1;
            }
            self.species[k].members.push(i);
        }
        self.species.retain(|s| !s.members.is_empty());
        for s in &mut self.species {
            s.representative = self.genomes[s.members[0]].clone();
        }
    }

    /// Speciates, selects and breeds the next generation.
    pub fn next_generation(&mut self) -> Result<(), EvolutionError> {
        for i in 0..self.genomes.len() {
            self.fitness_of(i)?;
        }
        let best = self.best_index().ok_or(EvolutionError::UnevaluatedParent)?;
        self.speciate();
        for s in &mut self.species {
            let top = s.members.iter().map(|&i| self.genomes[i].fitness.unwrap()).fold(f64::NEG_INFINITY, f64::max);
            if top > s.best_fitness {
                s.best_fitness = top;
                s.staleness = 0;
            } else {
                s.staleness += 1;
            }
        }
        let limit = self.config.staleness_limit;
        self.reseeded = self.species.iter().all(|s| s.staleness > limit);
        if self.reseeded {
            log::warn!("generation {}: every species is stale, reseeding from the best genome", self.generation);
            return self.reseed(best);
        }
        self.species.retain(|s| s.staleness <= limit || s.members.contains(&best));

        let penalty = self.config.penalty_fitness;
        let floor = self
            .species
            .iter()
            .flat_map(|s| &s.members)
            .map(|&i| self.genomes[i].fitness.unwrap())
            .filter(|&f| f != penalty)
            .fold(f64::INFINITY, f64::min);
        let shares: Vec<f64> = self
            .species
            .iter()
            .map(|s| {
                let adjusted: f64 =
                    s.members.iter().map(|&i| (self.genomes[i].fitness.unwrap() - floor).max(0.0)).sum();
                adjusted / s.members.len() as f64
            })
            .collect();

        let size = self.config.population_size;
        let elites = self.elites(size);
        let quotas = apportion(&shares, size - elites.len());
        let generation = self.generation + 1;
        self.registry.new_generation();
        let mut next: Vec<Genome> = elites.iter().map(|&i| self.genomes[i].clone()).collect();
        for (s, &quota) in self.species.iter().zip(&quotas) {
            let mut pool = s.members.clone();
            pool.sort_by(|&a, &b| {
                self.genomes[b].fitness.unwrap().total_cmp(&self.genomes[a].fitness.unwrap()).then(a.cmp(&b))
            });
            let keep = ((pool.len() as f64 * self.config.survival_fraction).ceil() as usize).clamp(1, pool.len());
            pool.truncate(keep);
            for _ in 0..quota {
                let mut rng = genome_rng(self.config.seed, generation, next.len());
                let mut child = if pool.len() >= 2 && rng.gen_bool(self.config.crossover_rate) {
                    let a = rng.gen_range(0..pool.len());
                    let mut b = rng.gen_range(0..pool.len() - 1);
                    if b >= a {
                        b += 1;
                    }
                    crossover(&self.genomes[pool[a]], &self.genomes[pool[b]], &mut rng)?
                } else {
                    self.genomes[pool[rng.gen_range(0..pool.len())]].clone()
                };
                mutate(&mut child, &self.config, &mut self.registry, &mut rng);
                next.push(child);
            }
        }
        self.genomes = next;
        self.generation = generation;
        Ok(())
    }

    /// Global top `elitism` genomes (fitness descending, index ascending).
    fn elites(&self, size: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.genomes.len()).collect();
        order.sort_by(|&a, &b| {
            self.genomes[b].fitness.unwrap().total_cmp(&self.genomes[a].fitness.unwrap()).then(a.cmp(&b))
        });
        order.truncate(self.config.elitism.min(size));
        order
    }

    fn reseed(&mut self, best: usize) -> Result<(), EvolutionError> {
        let size = self.config.population_size;
        let generation = self.generation + 1;
        self.registry.new_generation();
        let mut next: Vec<Genome> = self.elites(size).into_iter().map(|i| self.genomes[i].clone()).collect();
        while next.len() < size {
            let mut rng = genome_rng(self.config.seed, generation, next.len());
            let mut child = self.genomes[best].clone();
            child.fitness = None;
            mutate(&mut child, &self.config, &mut self.registry, &mut rng);
            next.push(child);
        }
        self.species.clear();
        self.genomes = next;
        self.generation = generation;
        Ok(())
    }
}

/// Outcome of an evolutionary run.
#[derive(Debug, Clone)]
pub struct EvolutionRun {
    /// Fittest genome seen in any generation.
    pub best: Genome,
    /// One entry per evaluated generation, starting with the initial population.
    pub history: Vec<GenerationStats>,
    /// First generation whose best fitness reached the configured threshold.
    pub solved_at: Option<usize>,
}

/// Runs NEAT on a fresh population until `max_generations` transitions have
/// happened or the fitness threshold is reached.
pub fn evolve<F>(
    inputs: usize,
    outputs: usize,
    config: &EvolutionConfig,
    fitness: F,
) -> Result<EvolutionRun, EvolutionError>
where
    F: Fn(&Genome) -> f64 + Sync,
{
    let mut pop = Population::new(inputs, outputs, config)?;
    let mut history = Vec::new();
    let mut best: Option<Genome> = None;
    let mut solved_at = None;
    loop {
        pop.evaluate(&fitness);
        let stats = pop.stats();
        log::debug!(
            "generation {}: best {:.6} mean {:.6} species {}",
            stats.generation,
            stats.best_fitness,
            stats.mean_fitness,
            stats.species
        );
        history.push(stats);
        let i = pop.best_index().expect("population is evaluated");
        if best.as_ref().is_none_or(|b| pop.genomes[i].fitness > b.fitness) {
            best = Some(pop.genomes[i].clone());
        }
        if config.fitness_threshold.is_some_and(|t| stats.best_fitness >= t) {
            solved_at = Some(pop.generation);
            break;
        }
        if pop.generation >= config.max_generations {
            break;
        }
        pop.next_generation()?;
    }
    Ok(EvolutionRun { best: best.expect("at least one generation"), history, solved_at })
}
