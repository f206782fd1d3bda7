//! Probabilistic forward-stepwise model-space priors, exact posterior
//! propagation for small `p`, and the LIPS sequential Monte Carlo sampler for
//! Bayesian model averaging in linear regression.

pub mod bayes;
pub mod error;
pub mod exact;
pub mod lips;
pub mod mc3;
pub mod model;
pub mod prior;
pub mod proposal;
pub mod rng;
pub mod workbench;

pub use error::{LipsError, Result};
pub use model::{ModelVector, PathStep};
pub use prior::PfsPrior;
