//! Sequential importance sampling over forward-stepwise paths, with
//! Horvitz-Thompson estimation of posterior expectations.

mod delta;
mod engine;
mod estimate;

pub use delta::{pip_delta, prediction_delta, shrinkage, DeltaEvaluator, DeltaKind, ModelFit};
pub use engine::{propagate_step, run_island, run_lips, IslandResult, LipsConfig, LipsRun, Particle, Sample};
pub use estimate::{
    effective_sample_size, ht_estimate, ht_from_values, islanded_delta, islanded_estimate, islanded_pips,
    pip_estimates, HtEstimate,
};
