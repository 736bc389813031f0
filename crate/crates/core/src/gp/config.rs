use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::TreeGenConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Crossover,
    Subtree,
    Hoist,
    Point,
    Reproduction,
    Sgd,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Crossover,
        Strategy::Subtree,
        Strategy::Hoist,
        Strategy::Point,
        Strategy::Reproduction,
        Strategy::Sgd,
    ];
}

/// Probability of each variation strategy per offspring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyProbs {
    pub crossover: f64,
    pub subtree: f64,
    pub hoist: f64,
    pub point: f64,
    pub reproduction: f64,
    pub sgd: f64,
}

impl Default for StrategyProbs {
    /// SGD at 0.2; the five classical options split the remaining 0.8.
    fn default() -> Self {
        StrategyProbs {
            crossover: 0.688,
            subtree: 0.0344,
            hoist: 0.0344,
            point: 0.0344,
            reproduction: 0.0088,
            sgd: 0.2,
        }
    }
}

impl StrategyProbs {
    /// Same classical ratios with the SGD mass removed and the rest renormalized.
    pub fn vanilla() -> Self {
        StrategyProbs::default().with_sgd(0.0)
    }

    /// Sets the SGD probability and rescales the classical options to fill the rest.
    pub fn with_sgd(self, sgd: f64) -> Self {
        let classical = 1.0 - self.sgd;
        let scale = if classical > 0.0 {
            (1.0 - sgd) / classical
        } else {
            0.0
        };
        StrategyProbs {
            crossover: self.crossover * scale,
            subtree: self.subtree * scale,
            hoist: self.hoist * scale,
            point: self.point * scale,
            reproduction: self.reproduction * scale,
            sgd,
        }
    }

    pub fn get(&self, s: Strategy) -> f64 {
        match s {
            Strategy::Crossover => self.crossover,
            Strategy::Subtree => self.subtree,
            Strategy::Hoist => self.hoist,
            Strategy::Point => self.point,
            Strategy::Reproduction => self.reproduction,
            Strategy::Sgd => self.sgd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = Strategy::ALL.map(|s| self.get(s));
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config(format!("strategy probabilities out of range: {self:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "strategy probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Strategy {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for s in Strategy::ALL {
            acc += self.get(s);
            if u < acc {
                return s;
            }
        }
        Strategy::Reproduction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub strategy_probs: StrategyProbs,
    pub sgd_lr: f64,
    pub sgd_steps: usize,
    pub parsimony_coeff: f64,
    /// Depth cap enforced after every variation.
    pub max_depth: usize,
    /// Initial-population ramp.
    pub init_min_depth: usize,
    pub init_max_depth: usize,
    pub leaf_prob: f64,
    pub const_prob: f64,
    pub const_range: (f64, f64),
    /// Regression stops once the best MSE falls below this.
    pub target_mse: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            population_size: 50,
            generations: 300,
            tournament_size: 3,
            strategy_probs: StrategyProbs::default(),
            sgd_lr: 0.005,
            sgd_steps: 25,
            parsimony_coeff: 0.001,
            max_depth: 8,
            init_min_depth: 2,
            init_max_depth: 6,
            leaf_prob: 0.3,
            const_prob: 0.3,
            const_range: (-5.0, 5.0),
            target_mse: 1e-10,
            seed: 0,
            workers: 1,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        self.strategy_probs.validate()?;
        if self.population_size == 0 || self.generations == 0 {
            return Err(Error::Config("population_size and generations must be positive".into()));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return Err(Error::Config(format!(
                "tournament_size {} must be in 1..={}",
                self.tournament_size, self.population_size
            )));
        }
        if self.max_depth == 0 || self.init_max_depth > self.max_depth {
            return Err(Error::Config("init_max_depth must not exceed max_depth".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn tree_gen(&self, num_features: usize) -> TreeGenConfig {
        TreeGenConfig {
            num_features,
            min_depth: self.init_min_depth,
            max_depth: self.init_max_depth,
            leaf_prob: self.leaf_prob,
            const_prob: self.const_prob,
            const_range: self.const_range,
            active_features: Vec::new(),
        }
    }
}
