use std::sync::Arc;

use super::{PfsPrior, SelectionRule, StoppingRule};
use crate::error::{domain, Result};
use crate::model::{check_enumerable, ModelVector};

/// Explicit `ρ` and `λ` tables over all `2^p` models, indexed by bitmask.
/// `λ` is stored densely, `p` entries per model.
#[derive(Clone, Debug)]
pub struct TabulatedPfs {
    p: usize,
    rho: Vec<f64>,
    lambda: Vec<f64>,
}

impl TabulatedPfs {
    pub fn from_tables(p: usize, rho: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        check_enumerable(p)?;
        let size = 1usize << p;
        if rho.len() != size || lambda.len() != size * p {
            return domain(format!("tables do not cover the 2^{p} models"));
        }
        Ok(Self { p, rho, lambda })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn rho_at(&self, mask: usize) -> f64 {
        self.rho[mask]
    }

    pub fn lambda_at(&self, mask: usize) -> &[f64] {
        &self.lambda[mask * self.p..(mask + 1) * self.p]
    }

    /// Wraps the tables as a [`PfsPrior`].
    pub fn into_prior(self) -> PfsPrior {
        let p = self.p;
        let shared = Arc::new(self);
        PfsPrior::new(p, shared.clone(), shared)
    }
}

impl StoppingRule for TabulatedPfs {
    fn rho(&self, model: &ModelVector) -> f64 {
        self.rho[model.to_mask()]
    }
}

impl SelectionRule for TabulatedPfs {
    fn weights(&self, model: &ModelVector, out: &mut [f64]) {
        out.copy_from_slice(self.lambda_at(model.to_mask()));
    }
}

/// Builds a pFS representation whose final-model law is `pi` (indexed by
/// bitmask, `2^p` entries).
///
/// Works by induction on the number of predictors. With the mappings for the
/// first `d-1` predictors in hand, models that contain predictor `d` stop
/// with certainty, and a model `γ` without it is split by how much mass its
/// extension `γ+d` carries:
///
/// * `π(γ+d) > 0`: `ρ = ρ'·π(γ)/π'(γ)`, the old predictors keep their flow
///   `(1-ρ')λ'_j`, and predictor `d` gets flow `ρ'·π(γ+d)/π'(γ)`;
/// * otherwise the lower-dimensional mappings carry over unchanged.
///
/// Here `π'` is the marginal over the first `d-1` predictors and `ρ', λ'` its
/// representation, with the convention that the full lower model stops with
/// `ρ' = 1` and hands all selection mass to predictor `d`.
pub fn pfs_from_distribution(pi: &[f64]) -> Result<TabulatedPfs> {
    let size = pi.len();
    if size == 0 || !size.is_power_of_two() {
        return domain(format!("distribution length {size} is not a power of two"));
    }
    let p = size.trailing_zeros() as usize;
    check_enumerable(p)?;
    if let Some(v) = pi.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return domain(format!("distribution has invalid entry {v}"));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("distribution sums to {total}, not 1"));
    }

    // margins[d][γ]: law of γ restricted to the first d predictors.
    let mut margins: Vec<Vec<f64>> = vec![Vec::new(); p + 1];
    margins[p] = pi.to_vec();
    for d in (0..p).rev() {
        let upper = &margins[d + 1];
        let half = 1usize << d;
        margins[d] = (0..half).map(|m| upper[m] + upper[m | half]).collect();
    }

    let mut rho = vec![1.0; size];
    let mut lambda = vec![0.0; size * p];
    for d in 1..=p {
        let b = d - 1;
        let bit = 1usize << b;
        let (cur, prev) = (&margins[d], &margins[d - 1]);
        // Models containing the new predictor: stop, uniform selection.
        for low in 0..bit {
            let mask = low | bit;
            rho[mask] = 1.0;
            let free = b + 1 - mask.count_ones() as usize;
            let row = &mut lambda[mask * p..(mask + 1) * p];
            for (j, slot) in row.iter_mut().enumerate().take(d) {
                *slot = if mask & (1 << j) == 0 { 1.0 / free as f64 } else { 0.0 };
            }
        }
        // Models without it, updated in place from the d-1 representation.
        for mask in 0..bit {
            let lower_full = mask == bit - 1;
            let rho_bar = if lower_full { 1.0 } else { rho[mask] };
            let row = &mut lambda[mask * p..(mask + 1) * p];
            if lower_full {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[b] = 1.0;
            }
            let (pi_here, pi_plus, pi_prev) = (cur[mask], cur[mask | bit], prev[mask]);
            if pi_plus > 0.0 {
                let new_rho = rho_bar * pi_here / pi_prev;
                // 1 - ρ without cancellation.
                let cont = (pi_plus + (1.0 - rho_bar) * pi_here) / pi_prev;
                rho[mask] = new_rho;
                if cont > 0.0 {
                    let keep = (1.0 - rho_bar) / cont;
                    for slot in row.iter_mut().take(b) {
                        *slot *= keep;
                    }
                    row[b] = pi_plus / pi_prev * rho_bar / cont;
                }
            } else {
                rho[mask] = rho_bar;
            }
        }
    }
    if p == 0 {
        rho[0] = 1.0;
    }
    TabulatedPfs::from_tables(p, rho, lambda)
}
