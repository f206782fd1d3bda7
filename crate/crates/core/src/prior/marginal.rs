use rand::Rng;

use super::PfsPrior;
use crate::error::{domain, Result};
use crate::model::{check_enumerable, ModelVector, PathStep};

/// Marginal law of the final pFS model, indexed by bitmask (bit `j` is
/// predictor `j`).
///
/// Forward DP: `reach(null) = 1`, each model pushes `reach·(1-ρ)·λ_j` to its
/// children, and the final-model mass is `reach·ρ` (`ρ = 1` on the full
/// model). Masks are visited in increasing numeric order, which lists every
/// subset before its supersets.
pub fn marginal_table(prior: &PfsPrior) -> Result<Vec<f64>> {
    let p = prior.p();
    check_enumerable(p)?;
    let size = 1usize << p;
    let mut reach = vec![0.0; size];
    let mut out = vec![0.0; size];
    let mut lambda = vec![0.0; p];
    reach[0] = 1.0;
    for mask in 0..size {
        let r = reach[mask];
        if r == 0.0 {
            continue;
        }
        let model = ModelVector::from_mask(p, mask);
        let rho = prior.rho(&model);
        out[mask] = r * rho;
        if rho >= 1.0 {
            continue;
        }
        prior.lambda_into(&model, &mut lambda)?;
        let flow = r * (1.0 - rho);
        for (j, &l) in lambda.iter().enumerate() {
            if l > 0.0 {
                reach[mask | (1 << j)] += flow * l;
            }
        }
    }
    Ok(out)
}

/// Marginal probability that the pFS procedure ends at `model`.
pub fn marginal_model_probability(prior: &PfsPrior, model: &ModelVector) -> Result<f64> {
    if model.p() != prior.p() {
        return domain("model dimension does not match the prior");
    }
    Ok(marginal_table(prior)?[model.to_mask()])
}

/// Runs the pFS procedure once: for `t = 1..p`, stop with probability
/// `ρ(γ_{t-1})`, otherwise add a predictor drawn from `λ(γ_{t-1})`.
/// Returns the final model and the decisions taken up to and including the
/// stop (a chain that fills the model records no stop).
pub fn simulate_pfs<R: Rng + ?Sized>(
    prior: &PfsPrior,
    rng: &mut R,
) -> Result<(ModelVector, Vec<PathStep>)> {
    let p = prior.p();
    let mut model = ModelVector::null(p);
    let mut path = Vec::new();
    let mut lambda = vec![0.0; p];
    for _ in 0..p {
        let rho = prior.rho(&model);
        if rho >= 1.0 || rng.random::<f64>() < rho {
            path.push(PathStep::stopped());
            return Ok((model, path));
        }
        prior.lambda_into(&model, &mut lambda)?;
        let j = sample_index(&lambda, rng.random::<f64>());
        path.push(PathStep::select(j));
        model = model.with(j);
    }
    Ok((model, path))
}

/// Inverse-CDF draw from nonnegative weights summing to one; `u ∈ [0,1)`.
/// Falls back to the last positive entry when rounding leaves `u` beyond the
/// cumulative total.
pub(crate) fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    last
}
