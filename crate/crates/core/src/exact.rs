//! Exhaustive posterior computation for small `p`: Bayes-factor tables, the
//! backward expected-Bayes-factor recursion `φ`, the posterior pFS mappings it
//! induces, and the enumeration posterior they must reproduce.
//!
//! Every table is indexed by model bitmask.

use log::debug;

use crate::bayes::quadrature::LogSum;
use crate::bayes::Evidence;
use crate::error::{domain, Result};
use crate::model::{check_enumerable, ModelVector};
use crate::prior::{marginal_table, PfsPrior, TabulatedPfs};

/// `ln BF_0` for all `2^p` models, by depth-first extension so each fit
/// reuses its parent's state. Unusable models get `-∞`.
pub fn bf_table<E: Evidence>(evidence: &E) -> Result<Vec<f64>> {
    let p = evidence.p();
    check_enumerable(p)?;
    let mut out = vec![f64::NEG_INFINITY; 1 << p];
    let Some(root) = evidence.node(&ModelVector::null(p)) else {
        return Ok(out);
    };
    // Children only add indices above the last one, so each subset is visited once.
    let mut stack = vec![(root, 0usize)];
    while let Some((node, next)) = stack.pop() {
        out[evidence.node_model(&node).to_mask()] = evidence.node_log_bf0(&node);
        for j in (next..p).rev() {
            if let Some(child) = evidence.extend(&node, j) {
                stack.push((child, j + 1));
            }
        }
    }
    Ok(out)
}

/// `ln φ(γ)` for every model.
///
/// Visits masks in decreasing order, so every extension is done before its
/// parent, and combines `ρ·BF_0(γ)` with `(1-ρ)·λ_j·φ(γ+j)` in increasing `j`.
pub fn compute_phi(prior: &PfsPrior, log_bf0: &[f64]) -> Result<Vec<f64>> {
    let p = prior.p();
    check_enumerable(p)?;
    if log_bf0.len() != 1 << p {
        return domain("Bayes-factor table does not match the prior dimension");
    }
    let mut phi = vec![f64::NEG_INFINITY; 1 << p];
    let mut lambda = vec![0.0; p];
    for mask in (0..1usize << p).rev() {
        let model = ModelVector::from_mask(p, mask);
        let rho = prior.rho(&model);
        if rho >= 1.0 {
            phi[mask] = log_bf0[mask];
            continue;
        }
        let mut acc = LogSum::new();
        if rho > 0.0 {
            acc.add(rho.ln() + log_bf0[mask]);
        }
        prior.lambda_into(&model, &mut lambda)?;
        let log_cont = (1.0 - rho).ln();
        for (j, &l) in lambda.iter().enumerate() {
            if l > 0.0 {
                acc.add(log_cont + l.ln() + phi[mask | (1 << j)]);
            }
        }
        phi[mask] = acc.value();
    }
    Ok(phi)
}

/// Counters for the numerical fallbacks taken by [`posterior_pfs`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PosteriorDiagnostics {
    /// Models whose continuation mass vanished; the prior `λ` was kept.
    pub lambda_fallbacks: usize,
    /// Models with `φ = 0`; the prior mappings were kept.
    pub unreachable: usize,
}

/// Posterior stopping and selection mappings from a `φ` table.
///
/// `ρ(γ|D) = ρ(γ)·BF_0(γ)/φ(γ)` and `λ_j(γ|D) ∝ λ_j(γ)·φ(γ+j)`. The selection
/// normalizer is the sum `Σ_j λ_j φ(γ+j)` itself rather than
/// `(φ - ρ·BF_0)/(1-ρ)`, which avoids the subtraction. Models with `ρ = 1`
/// keep the prior mappings.
pub fn posterior_pfs(
    prior: &PfsPrior,
    log_phi: &[f64],
    log_bf0: &[f64],
) -> Result<(TabulatedPfs, PosteriorDiagnostics)> {
    let p = prior.p();
    check_enumerable(p)?;
    let size = 1usize << p;
    if log_phi.len() != size || log_bf0.len() != size {
        return domain("tables do not match the prior dimension");
    }
    let mut rho_post = vec![1.0; size];
    let mut lambda_post = vec![0.0; size * p];
    let mut diag = PosteriorDiagnostics::default();
    let mut lambda = vec![0.0; p];
    for mask in 0..size - 1 {
        let model = ModelVector::from_mask(p, mask);
        let rho = prior.rho(&model);
        prior.lambda_into(&model, &mut lambda)?;
        let row = &mut lambda_post[mask * p..(mask + 1) * p];
        if rho >= 1.0 {
            row.copy_from_slice(&lambda);
            continue;
        }
        if log_phi[mask] == f64::NEG_INFINITY {
            diag.unreachable += 1;
            rho_post[mask] = rho;
            row.copy_from_slice(&lambda);
            continue;
        }
        rho_post[mask] = if rho > 0.0 {
            (rho.ln() + log_bf0[mask] - log_phi[mask]).exp().clamp(0.0, 1.0)
        } else {
            0.0
        };
        let mut norm = LogSum::new();
        for (j, &l) in lambda.iter().enumerate() {
            if l > 0.0 {
                norm.add(l.ln() + log_phi[mask | (1 << j)]);
            }
        }
        let log_norm = norm.value();
        if log_norm == f64::NEG_INFINITY {
            diag.lambda_fallbacks += 1;
            row.copy_from_slice(&lambda);
            continue;
        }
        for (j, &l) in lambda.iter().enumerate() {
            row[j] = if l > 0.0 {
                (l.ln() + log_phi[mask | (1 << j)] - log_norm).exp()
            } else {
                0.0
            };
        }
    }
    if diag != PosteriorDiagnostics::default() {
        debug!("posterior pFS fallbacks: {diag:?}");
    }
    Ok((TabulatedPfs::from_tables(p, rho_post, lambda_post)?, diag))
}

/// `π(γ|D) ∝ π(γ)·BF_0(γ)` over all models.
pub fn exact_posterior(prior: &PfsPrior, log_bf0: &[f64]) -> Result<Vec<f64>> {
    let marginal = marginal_table(prior)?;
    if log_bf0.len() != marginal.len() {
        return domain("Bayes-factor table does not match the prior dimension");
    }
    let logs: Vec<f64> = marginal
        .iter()
        .zip(log_bf0)
        .map(|(m, b)| if *m > 0.0 { m.ln() + b } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return domain("posterior has no mass: every model has zero prior or zero evidence");
    }
    let mut post: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = post.iter().sum();
    post.iter_mut().for_each(|v| *v /= total);
    Ok(post)
}

/// Posterior inclusion probabilities from a normalized table.
pub fn exact_pip(posterior: &[f64]) -> Result<Vec<f64>> {
    let size = posterior.len();
    if size == 0 || !size.is_power_of_two() {
        return domain("posterior table length is not a power of two");
    }
    let p = size.trailing_zeros() as usize;
    let mut pip = vec![0.0; p];
    for (mask, &w) in posterior.iter().enumerate() {
        let mut bits = mask;
        while bits != 0 {
            pip[bits.trailing_zeros() as usize] += w;
            bits &= bits - 1;
        }
    }
    Ok(pip)
}

/// Posterior mean of `delta` over all models.
pub fn exact_expectation<F: Fn(&ModelVector) -> f64>(posterior: &[f64], delta: F) -> f64 {
    let p = posterior.len().trailing_zeros() as usize;
    posterior
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(mask, w)| w * delta(&ModelVector::from_mask(p, mask)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{CoefficientPrior, RegressionData, RegressionEvidence, TableEvidence};
    use crate::prior::{marginal_table, uniform_size_prior};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn mask(s: &str) -> usize {
        s.parse::<ModelVector>().unwrap().to_mask()
    }

    /// BF_0 = 1, 2, 4, 8 for 00, 10, 01, 11.
    fn worked_table() -> Vec<f64> {
        let mut t = vec![0.0; 4];
        t[mask("00")] = 1f64.ln();
        t[mask("10")] = 2f64.ln();
        t[mask("01")] = 4f64.ln();
        t[mask("11")] = 8f64.ln();
        t
    }

    #[test]
    fn flat_evidence_gives_unit_phi_and_prior_mappings() {
        let prior = uniform_size_prior(4);
        let flat = vec![0.0; 16];
        let phi = compute_phi(&prior, &flat).unwrap();
        assert!(phi.iter().all(|v| v.abs() < 1e-15));
        let (post, diag) = posterior_pfs(&prior, &phi, &flat).unwrap();
        assert_eq!(diag, PosteriorDiagnostics::default());
        for m in 0..15 {
            let model = ModelVector::from_mask(4, m);
            assert!((post.rho_at(m) - prior.rho(&model)).abs() < 1e-14);
            let lam = prior.lambda(&model).unwrap();
            for (a, b) in post.lambda_at(m).iter().zip(&lam) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        let ex = exact_posterior(&prior, &flat).unwrap();
        let marg = marginal_table(&prior).unwrap();
        for (a, b) in ex.iter().zip(&marg) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn worked_p2_recursion() {
        let prior = uniform_size_prior(2);
        let bf = worked_table();
        let phi = compute_phi(&prior, &bf).unwrap();
        let exp = |m: &str| phi[mask(m)].exp();
        assert!((exp("11") - 8.0).abs() < 1e-13);
        assert!((exp("10") - 5.0).abs() < 1e-13);
        assert!((exp("01") - 6.0).abs() < 1e-13);
        assert!((exp("00") - 4.0).abs() < 1e-13);
        let (post, _) = posterior_pfs(&prior, &phi, &bf).unwrap();
        assert!((post.rho_at(0) - 1.0 / 12.0).abs() < 1e-15);
        assert!((post.lambda_at(0)[0] - 5.0 / 11.0).abs() < 1e-15);

        let ex = exact_posterior(&prior, &bf).unwrap();
        // Prior masses 1/3, 1/6, 1/6, 1/3 times 1, 2, 4, 8.
        let z = 1.0 / 3.0 + 2.0 / 6.0 + 4.0 / 6.0 + 8.0 / 3.0;
        assert!((ex[mask("11")] - (8.0 / 3.0) / z).abs() < 1e-15);
        let pip = exact_pip(&ex).unwrap();
        assert!((pip[0] - (2.0 / 6.0 + 8.0 / 3.0) / z).abs() < 1e-15);
    }

    #[test]
    fn stopped_prior_keeps_mappings() {
        let prior = uniform_size_prior(3).with_max_size(1);
        let bf: Vec<f64> = (0..8).map(|m| m as f64 * 0.3).collect();
        let phi = compute_phi(&prior, &bf).unwrap();
        let (post, _) = posterior_pfs(&prior, &phi, &bf).unwrap();
        let m = mask("010");
        assert_eq!(post.rho_at(m), 1.0);
        assert!((phi[m] - bf[m]).abs() < 1e-15);
    }

    #[test]
    fn point_mass_and_symmetric_pips() {
        let mut post = vec![0.0; 8];
        post[mask("101")] = 1.0;
        assert_eq!(exact_pip(&post).unwrap(), vec![1.0, 0.0, 1.0]);

        let prior = uniform_size_prior(4);
        let bf: Vec<f64> = (0..16usize).map(|m| m.count_ones() as f64 * 0.7).collect();
        let pip = exact_pip(&exact_posterior(&prior, &bf).unwrap()).unwrap();
        for v in &pip {
            assert!((v - pip[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn posterior_mappings_reproduce_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, p) = (40, 8);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[1] - 3.0 * r[4] + rng.random::<f64>()).collect();
        let data = Arc::new(RegressionData::new(&rows, &y).unwrap());
        let ev = RegressionEvidence::new(data, CoefficientPrior::unit_information(n));
        let bf = bf_table(&ev).unwrap();
        for (m, b) in bf.iter().enumerate() {
            assert!((b - ev.log_bf0(&ModelVector::from_mask(p, m))).abs() < 1e-9);
        }
        let prior = uniform_size_prior(p);
        let phi = compute_phi(&prior, &bf).unwrap();
        for m in 0..1 << p {
            let model = ModelVector::from_mask(p, m);
            assert!(phi[m] + 1e-12 >= prior.rho(&model).ln() + bf[m]);
        }
        let (post, _) = posterior_pfs(&prior, &phi, &bf).unwrap();
        let via_pfs = marginal_table(&post.into_prior()).unwrap();
        let direct = exact_posterior(&prior, &bf).unwrap();
        for (a, b) in via_pfs.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn dead_children_fall_back_to_prior() {
        // Every extension of 10 is unusable, but 10 itself continues under
        // the prior.
        let prior = uniform_size_prior(2);
        let bf = vec![0.0, 0.0, 0.0, f64::NEG_INFINITY];
        let ev = TableEvidence::new(2, bf.clone()).unwrap();
        assert_eq!(bf_table(&ev).unwrap(), bf);
        let phi = compute_phi(&prior, &bf).unwrap();
        let (post, diag) = posterior_pfs(&prior, &phi, &bf).unwrap();
        assert_eq!(post.rho_at(mask("10")), 1.0);
        assert_eq!(diag.lambda_fallbacks, 2);
    }
}
