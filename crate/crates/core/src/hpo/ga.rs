use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::{Assignment, SearchSpace};
use super::{evaluate, OptimizationResult, Trial};
use crate::error::{Error, Result};
use crate::rng::{rng, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    /// Generation count including the initial random population.
    pub generations: usize,
    pub tournament: usize,
    pub crossover: f64,
    pub mutation: f64,
    pub elitism: usize,
    /// Standard deviation of numeric mutations on the unit scale.
    pub mutation_scale: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 20,
            generations: 25,
            tournament: 3,
            crossover: 0.9,
            mutation: 0.1,
            elitism: 1,
            mutation_scale: 0.1,
        }
    }
}

fn fitness(t: &Trial) -> f64 {
    t.objective.unwrap_or(f64::INFINITY)
}

fn tournament<'a>(pop: &'a [Trial], size: usize, r: &mut Rng) -> &'a Assignment {
    let mut best = &pop[r.random_range(0..pop.len())];
    for _ in 1..size {
        let c = &pop[r.random_range(0..pop.len())];
        if fitness(c) < fitness(best) {
            best = c;
        }
    }
    &best.params
}

fn breed(space: &SearchSpace, a: &Assignment, b: &Assignment, cfg: &GaConfig, r: &mut Rng) -> Assignment {
    let cross = r.random::<f64>() < cfg.crossover;
    let noise = Normal::new(0.0, cfg.mutation_scale).expect("positive scale");
    let mut child = Assignment::new();
    for p in &space.params {
        let from_b = cross && r.random::<bool>();
        let mut v = if from_b { &b.0[&p.name] } else { &a.0[&p.name] }.clone();
        if r.random::<f64>() < cfg.mutation {
            v = match p.domain.n_choices() {
                Some(_) => p.domain.sample(r),
                None => {
                    let u = p.domain.to_unit(&v).expect("numeric value");
                    p.domain.from_unit(u + noise.sample(r)).expect("numeric domain")
                }
            };
        }
        child.0.insert(p.name.clone(), v);
    }
    child
}

/// Genetic search: tournament selection, uniform crossover, per-gene
/// mutation and elitism. Offspring of one generation are evaluated in
/// parallel; results do not depend on the thread count.
pub fn ga_optimize<F>(objective: F, space: &SearchSpace, cfg: &GaConfig, seed: u64) -> Result<OptimizationResult>
where
    F: Fn(&Assignment) -> Result<f64> + Sync,
{
    if cfg.population < 2 {
        return Err(Error::config("GA population must be at least 2"));
    }
    if cfg.generations == 0 {
        return Err(Error::config("GA needs at least one generation"));
    }
    if cfg.tournament == 0 || cfg.elitism >= cfg.population {
        return Err(Error::config("GA tournament size must be positive and elitism below the population"));
    }
    let mut r = rng(seed);
    let eval_all = |genomes: Vec<Assignment>| -> Vec<Trial> {
        genomes.into_par_iter().map(|g| evaluate(&objective, g)).collect()
    };
    let init: Vec<Assignment> = (0..cfg.population).map(|_| space.sample(&mut r)).collect();
    let mut pop = eval_all(init);
    let mut history = pop.clone();
    for _ in 1..cfg.generations {
        let mut ranked = pop.clone();
        ranked.sort_by(|a, b| fitness(a).total_cmp(&fitness(b)));
        let elite: Vec<Trial> = ranked.into_iter().take(cfg.elitism).collect();
        let children: Vec<Assignment> = (cfg.elitism..cfg.population)
            .map(|_| {
                let a = tournament(&pop, cfg.tournament, &mut r).clone();
                let b = tournament(&pop, cfg.tournament, &mut r).clone();
                breed(space, &a, &b, cfg, &mut r)
            })
            .collect();
        let offspring = eval_all(children);
        history.extend(offspring.iter().cloned());
        pop = elite.into_iter().chain(offspring).collect();
    }
    OptimizationResult::from_trials(history)
}
