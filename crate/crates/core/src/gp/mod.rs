//! Genetic programming: tournament evolution over expression trees with the
//! classical variation operators plus gradient refinement of constants.

mod config;
mod engine;
mod regression;
mod variation;

pub use config::{GpConfig, Strategy, StrategyProbs};
pub use engine::{
    best_index, evaluate, evolve, evolve_generation, sgd_refine, Candidate, Fitness,
    GenerationStats, Workers,
};
pub use regression::{
    run_regression, varying_columns, write_best_log, write_generation_csv, MseFitness, RegressionResult,
    GENERATION_CSV_HEADER,
};
pub use variation::{
    crossover, hoist_mutation, point_mutation, point_mutation_at, reproduction, subtree_mutation,
    ForestGenome, Genome, VariationConfig,
};
