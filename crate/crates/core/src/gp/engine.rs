use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{GpConfig, Strategy};
use super::variation::{Genome, VariationConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<G> {
    pub genome: G,
    pub fitness: Option<f64>,
    pub age: usize,
}

impl<G: Genome> Candidate<G> {
    pub fn new(genome: G) -> Self {
        Candidate {
            genome,
            fitness: None,
            age: 0,
        }
    }

    pub fn raw(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }

    /// Fitness minus the node-count penalty; used for tournament ranking only.
    pub fn penalized(&self, parsimony: f64) -> f64 {
        self.raw() - parsimony * self.genome.node_count() as f64
    }
}

/// Scores genomes. Higher fitness is better.
pub trait Fitness<G>: Sync {
    /// `stream` identifies a deterministic random stream for this evaluation
    /// (generation × population size + candidate index).
    fn fitness(&self, genome: &G, stream: u64) -> f64;

    /// Differentiable loss (lower is better) with its gradient over the
    /// genome's trainable constants. `None` disables the SGD strategy.
    fn loss_grad(&self, _genome: &G) -> Option<(f64, Vec<f64>)> {
        None
    }
}

/// Gradient descent on constants with a guarded step: a step that raises the
/// loss is undone and refinement stops. Non-finite gradients abort and return
/// the input unchanged.
pub fn sgd_refine<G, F>(genome: &G, oracle: F, steps: usize, lr: f64) -> G
where
    G: Genome,
    F: Fn(&G) -> Option<(f64, Vec<f64>)>,
{
    let mut consts = genome.constants();
    if consts.is_empty() || steps == 0 || lr == 0.0 {
        return genome.clone();
    }
    let mut current = genome.clone();
    let Some((mut loss, mut grad)) = oracle(&current) else {
        return genome.clone();
    };
    if !loss.is_finite() {
        return genome.clone();
    }
    for _ in 0..steps {
        if grad.iter().any(|g| !g.is_finite()) {
            return genome.clone();
        }
        let next: Vec<f64> = consts.iter().zip(&grad).map(|(c, g)| c - lr * g).collect();
        if next.iter().any(|c| !c.is_finite()) {
            break;
        }
        let candidate = current.with_constants(&next);
        let Some((l, g)) = oracle(&candidate) else {
            break;
        };
        if !l.is_finite() || l > loss {
            break;
        }
        current = candidate;
        consts = next;
        loss = l;
        grad = g;
    }
    current
}

/// Evaluates with `workers` threads. Results do not depend on the worker count.
pub struct Workers {
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    pub fn new(workers: usize) -> Self {
        let pool = (workers > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .expect("thread pool")
        });
        Workers { pool }
    }

    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync + Send,
    {
        match &self.pool {
            None => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            Some(pool) => pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()),
        }
    }
}

/// Fills in missing fitness values.
pub fn evaluate<G: Genome, F: Fitness<G>>(
    pop: &mut [Candidate<G>],
    fitness: &F,
    generation: usize,
    workers: &Workers,
) {
    let size = pop.len() as u64;
    let scores = workers.map(pop, |i, c| match c.fitness {
        Some(f) => f,
        None => {
            let f = fitness.fitness(&c.genome, generation as u64 * size + i as u64);
            if f.is_finite() {
                f
            } else {
                f64::MIN
            }
        }
    });
    for (c, s) in pop.iter_mut().zip(scores) {
        c.fitness = Some(s);
    }
}

fn tournament<'a, G: Genome, R: Rng + ?Sized>(
    pop: &'a [Candidate<G>],
    cfg: &GpConfig,
    rng: &mut R,
) -> &'a Candidate<G> {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..cfg.tournament_size {
        let c = &pop[rng.random_range(0..pop.len())];
        if c.penalized(cfg.parsimony_coeff) > best.penalized(cfg.parsimony_coeff) {
            best = c;
        }
    }
    best
}

/// Index of the best candidate by raw fitness; ties go to the lowest index.
pub fn best_index<G: Genome>(pop: &[Candidate<G>]) -> usize {
    let mut best = 0;
    for (i, c) in pop.iter().enumerate() {
        if c.raw() > pop[best].raw() {
            best = i;
        }
    }
    best
}

/// Breeds and evaluates the next generation. The best candidate is carried
/// over unchanged; every other slot is a tournament winner passed through one
/// strategy drawn from the configured mix.
pub fn evolve_generation<G: Genome, F: Fitness<G>, R: Rng + ?Sized>(
    pop: &[Candidate<G>],
    fitness: &F,
    cfg: &GpConfig,
    var: &VariationConfig,
    generation: usize,
    workers: &Workers,
    rng: &mut R,
) -> Vec<Candidate<G>> {
    assert!(!pop.is_empty(), "population must not be empty");
    let elite = &pop[best_index(pop)];
    let mut next = Vec::with_capacity(cfg.population_size);
    next.push(Candidate {
        genome: elite.genome.clone(),
        fitness: elite.fitness,
        age: elite.age + 1,
    });
    while next.len() < cfg.population_size {
        let strategy = cfg.strategy_probs.sample(rng);
        let parent = tournament(pop, cfg, rng);
        let child = match strategy {
            Strategy::Reproduction => Candidate {
                genome: parent.genome.clone(),
                fitness: parent.fitness,
                age: parent.age + 1,
            },
            Strategy::Sgd => {
                let refined = sgd_refine(&parent.genome, |g| fitness.loss_grad(g), cfg.sgd_steps, cfg.sgd_lr);
                Candidate::new(refined)
            }
            Strategy::Crossover => {
                let donor = tournament(pop, cfg, rng);
                Candidate::new(parent.genome.vary(strategy, &donor.genome, var, rng))
            }
            _ => Candidate::new(parent.genome.vary(strategy, &parent.genome, var, rng)),
        };
        next.push(child);
    }
    evaluate(&mut next, fitness, generation, workers);
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_node_count: usize,
    pub wall_time_s: f64,
}

impl GenerationStats {
    pub fn of<G: Genome>(pop: &[Candidate<G>], generation: usize, started: Instant) -> Self {
        let best = &pop[best_index(pop)];
        let finite: Vec<f64> = pop.iter().map(Candidate::raw).filter(|f| f.is_finite()).collect();
        GenerationStats {
            generation,
            best_fitness: best.raw(),
            mean_fitness: finite.iter().sum::<f64>() / finite.len().max(1) as f64,
            best_node_count: best.genome.node_count(),
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }
}

/// Runs `generations` rounds of evolution from an evaluated population.
/// `observe` sees every generation (including generation 0) and may stop
/// the run early by returning `false`.
pub fn evolve<G, F, O>(
    mut pop: Vec<Candidate<G>>,
    fitness: &F,
    cfg: &GpConfig,
    var: &VariationConfig,
    workers: &Workers,
    mut observe: O,
) -> (Vec<Candidate<G>>, Vec<GenerationStats>)
where
    G: Genome,
    F: Fitness<G>,
    O: FnMut(&GenerationStats, &[Candidate<G>]) -> bool,
{
    let started = Instant::now();
    let mut breed_rng = rng::stream(cfg.seed, &[0xB4EED]);
    evaluate(&mut pop, fitness, 0, workers);
    let mut history = vec![GenerationStats::of(&pop, 0, started)];
    if !observe(&history[0], &pop) {
        return (pop, history);
    }
    for generation in 1..=cfg.generations {
        pop = evolve_generation(&pop, fitness, cfg, var, generation, workers, &mut breed_rng);
        let stats = GenerationStats::of(&pop, generation, started);
        let keep_going = observe(&stats, &pop);
        history.push(stats);
        if !keep_going {
            break;
        }
    }
    (pop, history)
}
