//! Model-space priors in pFS form: a stopping rule `ρ(γ)` and a selection rule
//! `λ(γ)`.
//!
//! Selection rules produce unnormalized nonnegative weights; [`PfsPrior`]
//! zeroes the included predictors and renormalizes, so every composition of
//! decorators lands on the simplex over excluded predictors.

mod dilution;
mod marginal;
mod selection;
mod tabulated;

use std::fmt;
use std::sync::Arc;

use crate::error::{domain, LipsError, Result};
use crate::model::ModelVector;

pub use dilution::{complete_linkage_clusters, dilution_prior, DilutionSelection};
pub use marginal::{marginal_model_probability, marginal_table, simulate_pfs};
pub use selection::{
    block_rule, conditional_selection, uniform_selection, weighted_selection, BlockSelection,
    BlockStopping, ConditionalRule, ConditionalSelection, UniformSelection, WeightedSelection,
};
pub use tabulated::{pfs_from_distribution, TabulatedPfs};

/// Stopping probability `ρ(γ)`.
pub trait StoppingRule: Send + Sync {
    fn rho(&self, model: &ModelVector) -> f64;

    /// Size at and beyond which the rule always stops.
    fn max_size(&self) -> usize {
        usize::MAX
    }
}

/// Unnormalized selection weights over predictors.
pub trait SelectionRule: Send + Sync {
    /// Writes a nonnegative weight for every predictor into `out` (length `p`).
    /// Entries for included predictors are ignored by the caller.
    fn weights(&self, model: &ModelVector, out: &mut [f64]);
}

/// A pFS prior: stopping and selection rules on `{0,1}^p` minus the full model.
#[derive(Clone)]
pub struct PfsPrior {
    p: usize,
    stopping: Arc<dyn StoppingRule>,
    selection: Arc<dyn SelectionRule>,
    max_size: usize,
    /// Size distribution, when the prior is known to be symmetric (equal mass
    /// on models of equal size).
    symmetric_sizes: Option<Vec<f64>>,
}

impl fmt::Debug for PfsPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PfsPrior")
            .field("p", &self.p)
            .field("max_size", &self.max_size)
            .field("symmetric", &self.symmetric_sizes.is_some())
            .finish()
    }
}

impl PfsPrior {
    pub fn new(p: usize, stopping: Arc<dyn StoppingRule>, selection: Arc<dyn SelectionRule>) -> Self {
        let max_size = stopping.max_size().min(p);
        Self {
            p,
            stopping,
            selection,
            max_size,
            symmetric_sizes: None,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn stopping(&self) -> &Arc<dyn StoppingRule> {
        &self.stopping
    }

    pub fn selection(&self) -> &Arc<dyn SelectionRule> {
        &self.selection
    }

    /// Size distribution `q` when the prior is symmetric.
    pub fn symmetric_sizes(&self) -> Option<&[f64]> {
        self.symmetric_sizes.as_deref()
    }

    /// Forces `ρ = 1` for every model of size `>= s_max`.
    pub fn with_max_size(mut self, s_max: usize) -> Self {
        let s_max = s_max.min(self.p);
        if s_max < self.max_size {
            self.max_size = s_max;
            if let Some(q) = self.symmetric_sizes.as_mut() {
                let tail: f64 = q[s_max..].iter().sum();
                for v in q[s_max..].iter_mut() {
                    *v = 0.0;
                }
                q[s_max] = tail;
            }
        }
        self
    }

    pub(crate) fn with_symmetric_sizes(mut self, q: Vec<f64>) -> Self {
        self.symmetric_sizes = Some(q);
        self
    }

    /// `ρ(γ)`, with `ρ = 1` on the full model and at or beyond `s_max`.
    pub fn rho(&self, model: &ModelVector) -> f64 {
        if model.size() >= self.max_size || model.is_full() {
            return 1.0;
        }
        self.stopping.rho(model).clamp(0.0, 1.0)
    }

    /// `λ(γ)` on the simplex over excluded predictors.
    ///
    /// Returns all zeros when `ρ(γ) = 1` and no predictor has positive weight;
    /// the selection is irrelevant there. The same situation with `ρ(γ) < 1`
    /// is a configuration error.
    pub fn lambda(&self, model: &ModelVector) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.p];
        self.lambda_into(model, &mut out)?;
        Ok(out)
    }

    pub fn lambda_into(&self, model: &ModelVector, out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        if model.is_full() {
            return Ok(());
        }
        self.selection.weights(model, out);
        let mut total = 0.0;
        for (j, w) in out.iter_mut().enumerate() {
            if model.contains(j) {
                *w = 0.0;
            } else if !(*w >= 0.0) || !w.is_finite() {
                return Err(LipsError::Config(format!(
                    "selection weight for predictor {j} at {model} is {w}"
                )));
            }
            total += *w;
        }
        if total <= 0.0 {
            if self.rho(model) < 1.0 {
                return Err(LipsError::Config(format!(
                    "no selectable predictor at {model} while the stopping probability is below one"
                )));
            }
            return Ok(());
        }
        out.iter_mut().for_each(|w| *w /= total);
        Ok(())
    }
}

/// Size-based stopping rule `ρ(γ) = h(|γ|)`.
#[derive(Clone, Debug)]
pub struct SizeStopping {
    h: Vec<f64>,
}

impl SizeStopping {
    /// `h` has one entry per size `0..=p`; the last entry is forced to 1.
    pub fn new(mut h: Vec<f64>) -> Self {
        if let Some(last) = h.last_mut() {
            *last = 1.0;
        }
        Self { h }
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }
}

impl StoppingRule for SizeStopping {
    fn rho(&self, model: &ModelVector) -> f64 {
        self.h.get(model.size()).copied().unwrap_or(1.0)
    }

    fn max_size(&self) -> usize {
        self.h.iter().position(|&v| v >= 1.0).unwrap_or(self.h.len())
    }
}

fn validate_size_distribution(q: &[f64]) -> Result<()> {
    if q.is_empty() {
        return domain("size distribution is empty");
    }
    if let Some(v) = q.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return domain(format!("size distribution has invalid entry {v}"));
    }
    let total: f64 = q.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("size distribution sums to {total}, not 1"));
    }
    Ok(())
}

/// Converts a prior on the model size, `q_0..q_p`, into the stopping function
/// `h(s) = q_s / (1 - Σ_{r<s} q_r)`. Where no mass remains at or above `s`
/// the rule stops with certainty.
pub fn size_prior_to_h(q: &[f64]) -> Result<SizeStopping> {
    validate_size_distribution(q)?;
    // 1 - Σ_{r<s} q_r, summed from the tail so exhausted mass is exactly 0.
    let mut tails = vec![0.0; q.len() + 1];
    for s in (0..q.len()).rev() {
        tails[s] = tails[s + 1] + q[s];
    }
    let h = q
        .iter()
        .zip(&tails)
        .map(|(&qs, &tail)| if tail <= 0.0 { 1.0 } else { (qs / tail).min(1.0) })
        .collect();
    Ok(SizeStopping::new(h))
}

/// Symmetric prior with size distribution `q`: stopping via the recursion
/// `h(t) = π(γ) C(p,t) / Π_{s<t} (1 - h(s))` with `π(γ) = q_t / C(p,t)`,
/// paired with uniform selection.
pub fn symmetric_pfs(q: &[f64]) -> Result<PfsPrior> {
    validate_size_distribution(q)?;
    let p = q.len() - 1;
    let mut h = Vec::with_capacity(p + 1);
    let mut survive = 1.0_f64;
    for &qt in q.iter() {
        // π(γ)·C(p,t) is q_t; the binomial cancels.
        let ht = if survive <= 0.0 { 1.0 } else { (qt / survive).min(1.0) };
        h.push(ht);
        survive *= 1.0 - ht;
    }
    let stopping = SizeStopping::new(h);
    Ok(PfsPrior::new(p, Arc::new(stopping), Arc::new(UniformSelection::new(p)))
        .with_symmetric_sizes(q.to_vec()))
}

/// Beta-Binomial(a, b) distribution on the model size `0..=p`.
pub fn beta_binomial_sizes(p: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > 0.0) {
        return domain(format!("beta-binomial parameters must be positive, got ({a}, {b})"));
    }
    use statrs::function::beta::ln_beta;
    use statrs::function::factorial::ln_binomial;
    let logs: Vec<f64> = (0..=p)
        .map(|s| {
            ln_binomial(p as u64, s as u64) + ln_beta(s as f64 + a, (p - s) as f64 + b) - ln_beta(a, b)
        })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut q: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    Ok(q)
}

/// Keeps the size distribution on `0..=s_max` (renormalized).
pub fn truncate_sizes(q: &[f64], s_max: usize) -> Result<Vec<f64>> {
    let mut out = q.to_vec();
    for v in out.iter_mut().skip(s_max + 1) {
        *v = 0.0;
    }
    let total: f64 = out.iter().sum();
    if total <= 0.0 {
        return domain("truncation removes all prior mass");
    }
    out.iter_mut().for_each(|v| *v /= total);
    Ok(out)
}

/// Beta-Binomial(1,1) prior: equal mass on every model size.
pub fn uniform_size_prior(p: usize) -> PfsPrior {
    symmetric_pfs(&vec![1.0 / (p as f64 + 1.0); p + 1]).expect("uniform size prior is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::enumerate_models;

    #[test]
    fn h_from_size_prior() {
        let p = 5;
        let q = vec![1.0 / 6.0; 6];
        let rule = size_prior_to_h(&q).unwrap();
        for s in 0..=p {
            let want = 1.0 / (p + 1 - s) as f64;
            assert!((rule.h()[s] - want).abs() < 1e-14, "s={s}");
        }

        let rule = size_prior_to_h(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(rule.h()[0], 1.0);
        assert_eq!(rule.max_size(), 0);

        let rule = size_prior_to_h(&[0.4, 0.3, 0.2, 0.1]).unwrap();
        let want = [0.4, 0.5, 2.0 / 3.0, 1.0];
        for (got, want) in rule.h().iter().zip(want) {
            assert!((got - want).abs() < 1e-14);
        }

        // Exhausted mass maps to certain stopping.
        let rule = size_prior_to_h(&[0.5, 0.5, 0.0, 0.0]).unwrap();
        assert_eq!(rule.h(), &[0.5, 1.0, 1.0, 1.0]);
        assert_eq!(rule.max_size(), 1);
    }

    #[test]
    fn size_prior_validation() {
        assert!(size_prior_to_h(&[0.5, 0.6]).is_err());
        assert!(size_prior_to_h(&[-0.1, 1.1]).is_err());
        assert!(symmetric_pfs(&[0.2, 0.2]).is_err());
    }

    #[test]
    fn symmetric_prior_marginals() {
        let prior = symmetric_pfs(&[0.25; 4]).unwrap();
        let m = marginal_model_probability(&prior, &"110".parse().unwrap()).unwrap();
        assert!((m - 1.0 / 12.0).abs() < 1e-14);

        let point = symmetric_pfs(&[1.0, 0.0, 0.0]).unwrap();
        let table = marginal_table(&point).unwrap();
        assert_eq!(table[0], 1.0);
        assert!(table[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn beta_binomial_one_one_is_uniform() {
        let q = beta_binomial_sizes(15, 1.0, 1.0).unwrap();
        for v in q {
            assert!((v - 1.0 / 16.0).abs() < 1e-12);
        }
        let prior = uniform_size_prior(15);
        assert_eq!(prior.max_size(), 15);
    }

    #[test]
    fn max_size_cap_moves_tail_mass() {
        let p = 4;
        let prior = uniform_size_prior(p).with_max_size(2);
        let q = prior.symmetric_sizes().unwrap();
        for (g, w) in q.iter().zip([0.2, 0.2, 0.6, 0.0, 0.0]) {
            assert!((g - w).abs() < 1e-15);
        }
        let table = marginal_table(&prior).unwrap();
        for m in enumerate_models(p).unwrap() {
            let got = table[m.to_mask()];
            let want = match m.size() {
                0 => 0.2,
                1 => 0.2 / 4.0,
                2 => 0.6 / 6.0,
                _ => 0.0,
            };
            assert!((got - want).abs() < 1e-14, "{m}");
        }
    }
}
