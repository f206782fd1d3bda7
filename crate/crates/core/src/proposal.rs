//! Local information propagation: the `φ` recursion truncated `k` levels
//! below an anchor model, and the proposal mappings built from it.

use std::collections::HashMap;

use crate::bayes::quadrature::LogSum;
use crate::bayes::Evidence;
use crate::error::{domain, Result};
use crate::model::ModelVector;
use crate::prior::PfsPrior;

/// Which mappings drive particle propagation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalKind {
    /// Look-ahead proposal with depth `k >= 1`.
    Lip { k: usize },
    /// The prior mappings themselves.
    Prior,
}

/// Default look-ahead depth: 3 up to 500 predictors, 2 beyond.
pub fn default_lookahead(p: usize) -> usize {
    if p <= 500 {
        3
    } else {
        2
    }
}

/// One selectable extension of the anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct ChildEntry {
    pub index: usize,
    pub log_lambda: f64,
    pub log_lambda_hat: f64,
    pub log_phi_hat: f64,
    pub log_bf0: f64,
    /// `ln((1−ρ)λ_j) − ln((1−ρ̂)λ̂_j)`.
    pub log_ratio: f64,
}

/// Proposal mappings at one anchor model.
#[derive(Clone, Debug, PartialEq)]
pub struct ProposalDistribution {
    pub rho: f64,
    pub rho_hat: f64,
    pub log_phi_hat: f64,
    pub log_bf0: f64,
    /// Extensions with positive proposal mass, in increasing index order.
    pub children: Vec<ChildEntry>,
    /// `ln ρ − ln ρ̂`.
    pub stop_log_ratio: f64,
    /// No extension was selectable although `ρ < 1`; the proposal stops.
    pub forced_stop: bool,
}

/// Outcome of one proposal draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Stop,
    /// Position in [`ProposalDistribution::children`].
    Select(usize),
}

impl ProposalDistribution {
    /// `λ̂` as a dense vector over all `p` predictors.
    pub fn lambda_hat(&self, p: usize) -> Vec<f64> {
        let mut out = vec![0.0; p];
        for c in &self.children {
            out[c.index] = c.log_lambda_hat.exp();
        }
        out
    }

    /// Stops when `u_stop < ρ̂`, otherwise selects by inverse CDF on `u_select`.
    pub fn sample(&self, u_stop: f64, u_select: f64) -> Decision {
        if self.children.is_empty() || u_stop < self.rho_hat {
            return Decision::Stop;
        }
        let mut acc = 0.0;
        for (pos, c) in self.children.iter().enumerate() {
            acc += c.log_lambda_hat.exp();
            if u_select < acc {
                return Decision::Select(pos);
            }
        }
        Decision::Select(self.children.len() - 1)
    }
}

struct Expansion<'a, E: Evidence> {
    prior: &'a PfsPrior,
    evidence: &'a E,
    memo: HashMap<ModelVector, f64>,
    /// Children's Bayes factors at depth-1 nodes.
    scratch: Vec<f64>,
    /// One selection buffer per remaining depth; a node at depth `d` only
    /// recurses into depth `d - 1`.
    lambdas: Vec<Vec<f64>>,
}

/// `ln Σ_j λ_j·exp(l_j)` over the `j` with `λ_j > 0`.
fn weighted_log_sum(lambda: &[f64], logs: &[f64]) -> f64 {
    let max = lambda
        .iter()
        .zip(logs)
        .filter(|(&w, _)| w > 0.0)
        .map(|(_, &l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = lambda
        .iter()
        .zip(logs)
        .filter(|(&w, _)| w > 0.0)
        .map(|(&w, &l)| w * (l - max).exp())
        .sum();
    max + sum.ln()
}

impl<'a, E: Evidence> Expansion<'a, E> {
    fn new(prior: &'a PfsPrior, evidence: &'a E, depth: usize) -> Self {
        Self {
            prior,
            evidence,
            memo: HashMap::new(),
            scratch: Vec::new(),
            lambdas: vec![Vec::new(); depth + 1],
        }
    }

    /// `ln φ̂` of `node` with `depth` levels left before the leaf rule.
    fn value(&mut self, node: &E::Node, depth: usize) -> Result<f64> {
        let model = self.evidence.node_model(node).clone();
        let bf = self.evidence.node_log_bf0(node);
        self.combine(&model, bf, depth, |this, lambda| {
            if depth == 1 {
                let mut children = std::mem::take(&mut this.scratch);
                children.resize(lambda.len(), 0.0);
                this.evidence.children_log_bf0(node, &mut children);
                let v = weighted_log_sum(lambda, &children);
                this.scratch = children;
                Ok(v)
            } else {
                let mut acc = LogSum::new();
                for (j, &l) in lambda.iter().enumerate() {
                    if l > 0.0 {
                        let v = this.child_value(node, &model, j, depth - 1)?;
                        acc.add(l.ln() + v);
                    }
                }
                Ok(acc.value())
            }
        })
    }

    /// `ρ·BF + (1-ρ)·Σ λ_j·φ̂_j` in log space, with the sum supplied by `cont`
    /// from the selection probabilities of `model`.
    fn combine<F>(&mut self, model: &ModelVector, bf: f64, depth: usize, cont: F) -> Result<f64>
    where
        F: FnOnce(&mut Self, &[f64]) -> Result<f64>,
    {
        if depth == 0 || model.is_full() {
            return Ok(bf);
        }
        let rho = self.prior.rho(model);
        if rho >= 1.0 {
            return Ok(bf);
        }
        let mut lambda = std::mem::take(&mut self.lambdas[depth]);
        lambda.resize(self.prior.p(), 0.0);
        let log_cont_mass = self
            .prior
            .lambda_into(model, &mut lambda)
            .and_then(|()| cont(self, &lambda));
        self.lambdas[depth] = lambda;
        let log_cont_mass = log_cont_mass?;
        let mut acc = LogSum::new();
        if rho > 0.0 {
            acc.add(rho.ln() + bf);
        }
        acc.add((1.0 - rho).ln() + log_cont_mass);
        Ok(acc.value())
    }

    /// `value(node + j, 1)` without building the state of `node + j`.
    fn leaf_value(&mut self, node: &E::Node, child: &ModelVector, j: usize) -> Result<f64> {
        let mut grand = std::mem::take(&mut self.scratch);
        grand.resize(self.prior.p(), 0.0);
        let v = match self.evidence.extension_children_log_bf0(node, j, &mut grand) {
            Some(bf) => self.combine(child, bf, 1, |_, lambda| Ok(weighted_log_sum(lambda, &grand))),
            None => Ok(f64::NEG_INFINITY),
        };
        self.scratch = grand;
        v
    }

    fn child_value(&mut self, node: &E::Node, model: &ModelVector, j: usize, depth: usize) -> Result<f64> {
        let key = model.with(j);
        if let Some(&v) = self.memo.get(&key) {
            return Ok(v);
        }
        let v = if depth == 1 {
            self.leaf_value(node, &key, j)?
        } else {
            match self.evidence.extend(node, j) {
                Some(child) => self.value(&child, depth)?,
                None => f64::NEG_INFINITY,
            }
        };
        self.memo.insert(key, v);
        Ok(v)
    }
}

/// `ln φ̂(γ)` with the anchor at `γ` and look-ahead depth `k`.
pub fn phi_hat<E: Evidence>(model: &ModelVector, k: usize, prior: &PfsPrior, evidence: &E) -> Result<f64> {
    if k == 0 {
        return domain("look-ahead depth must be at least 1");
    }
    let Some(node) = evidence.node(model) else {
        return Ok(f64::NEG_INFINITY);
    };
    Expansion::new(prior, evidence, k).value(&node, k)
}

/// Proposal mappings at the anchor `node`.
///
/// Each extension's value comes from a single depth-`(k-1)` expansion shared
/// with the anchor's own `φ̂`, so `φ̂(γ) = ρ·BF_0(γ) + (1−ρ)·Σ_j λ_j·φ̂(γ+j)`
/// holds exactly.
pub fn proposal_at<E: Evidence>(
    node: &E::Node,
    kind: ProposalKind,
    prior: &PfsPrior,
    evidence: &E,
) -> Result<ProposalDistribution> {
    let p = prior.p();
    let model = evidence.node_model(node).clone();
    let bf = evidence.node_log_bf0(node);
    let rho = prior.rho(&model);
    if rho >= 1.0 {
        return Ok(ProposalDistribution {
            rho: 1.0,
            rho_hat: 1.0,
            log_phi_hat: bf,
            log_bf0: bf,
            children: Vec::new(),
            stop_log_ratio: 0.0,
            forced_stop: false,
        });
    }
    let lambda = prior.lambda(&model)?;
    let log_rho = rho.ln();
    let log_cont = (1.0 - rho).ln();
    let mut children = Vec::new();

    match kind {
        ProposalKind::Lip { k } if k >= 2 => {
            let mut exp = Expansion::new(prior, evidence, k - 1);
            for (j, &l) in lambda.iter().enumerate() {
                if l <= 0.0 {
                    continue;
                }
                if let Some(child) = evidence.extend(node, j) {
                    let v = exp.value(&child, k - 1)?;
                    if v > f64::NEG_INFINITY {
                        children.push(ChildEntry {
                            index: j,
                            log_lambda: l.ln(),
                            log_lambda_hat: 0.0,
                            log_phi_hat: v,
                            log_bf0: evidence.node_log_bf0(&child),
                            log_ratio: 0.0,
                        });
                    }
                }
            }
        }
        ProposalKind::Lip { k: 0 } => return domain("look-ahead depth must be at least 1"),
        ProposalKind::Lip { .. } | ProposalKind::Prior => {
            let mut bfs = vec![0.0; p];
            evidence.children_log_bf0(node, &mut bfs);
            for (j, &l) in lambda.iter().enumerate() {
                if l > 0.0 && bfs[j] > f64::NEG_INFINITY {
                    children.push(ChildEntry {
                        index: j,
                        log_lambda: l.ln(),
                        log_lambda_hat: 0.0,
                        log_phi_hat: bfs[j],
                        log_bf0: bfs[j],
                        log_ratio: 0.0,
                    });
                }
            }
        }
    }

    let mut cont = LogSum::new();
    for c in &children {
        cont.add(c.log_lambda + c.log_phi_hat);
    }
    let log_cont_mass = cont.value();
    let mut stop = LogSum::new();
    if rho > 0.0 {
        stop.add(log_rho + bf);
    }
    let mut total = stop;
    total.add(log_cont + log_cont_mass);
    let log_phi_hat = total.value();

    if log_cont_mass == f64::NEG_INFINITY {
        return Ok(ProposalDistribution {
            rho,
            rho_hat: 1.0,
            log_phi_hat,
            log_bf0: bf,
            children: Vec::new(),
            stop_log_ratio: log_rho,
            forced_stop: true,
        });
    }

    if kind == ProposalKind::Prior {
        // Unselectable extensions lose their prior mass; renormalize.
        let log_kept = {
            let mut s = LogSum::new();
            children.iter().for_each(|c| s.add(c.log_lambda));
            s.value()
        };
        for c in children.iter_mut() {
            c.log_lambda_hat = c.log_lambda - log_kept;
            c.log_ratio = log_kept;
        }
        return Ok(ProposalDistribution {
            rho,
            rho_hat: rho,
            log_phi_hat,
            log_bf0: bf,
            children,
            stop_log_ratio: 0.0,
            forced_stop: false,
        });
    }

    for c in children.iter_mut() {
        c.log_lambda_hat = c.log_lambda + c.log_phi_hat - log_cont_mass;
        // (1−ρ̂)λ̂_j = (1−ρ)λ_j φ̂(γ+j)/φ̂(γ).
        c.log_ratio = log_phi_hat - c.log_phi_hat;
    }
    let rho_hat = if rho > 0.0 {
        (log_rho + bf - log_phi_hat).exp().clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(ProposalDistribution {
        rho,
        rho_hat,
        log_phi_hat,
        log_bf0: bf,
        children,
        stop_log_ratio: if rho > 0.0 { log_phi_hat - bf } else { 0.0 },
        forced_stop: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{CoefficientPrior, FnEvidence, RegressionData, RegressionEvidence, TableEvidence};
    use crate::exact::{bf_table, compute_phi, posterior_pfs};
    use crate::model::enumerate_models;
    use crate::prior::uniform_size_prior;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn dataset(seed: u64, n: usize, p: usize) -> RegressionEvidence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 3.0 * r[0] - 2.0 * r[3] + r[p - 1] + 0.5 * rng.random::<f64>())
            .collect();
        let data = Arc::new(RegressionData::new(&rows, &y).unwrap());
        RegressionEvidence::new(data, CoefficientPrior::unit_information(n))
    }

    #[test]
    fn flat_evidence_returns_prior() {
        let p = 5;
        let prior = uniform_size_prior(p);
        let ev = TableEvidence::flat(p).unwrap();
        for m in enumerate_models(p).unwrap().filter(|m| m.size() < p) {
            let node = ev.node(&m).unwrap();
            let q = proposal_at(&node, ProposalKind::Lip { k: 2 }, &prior, &ev).unwrap();
            assert!((q.rho_hat - prior.rho(&m)).abs() < 1e-14);
            let lam = prior.lambda(&m).unwrap();
            for (a, b) in q.lambda_hat(p).iter().zip(&lam) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn one_level_unroll() {
        let p = 6;
        let prior = uniform_size_prior(p);
        let ev = dataset(1, 30, p);
        let m = ModelVector::from_indices(p, &[2]).unwrap();
        let got = phi_hat(&m, 1, &prior, &ev).unwrap();
        let rho = prior.rho(&m);
        let lam = prior.lambda(&m).unwrap();
        let mut want = rho * ev.log_bf0(&m).exp();
        for j in 0..p {
            if lam[j] > 0.0 {
                want += (1.0 - rho) * lam[j] * ev.log_bf0(&m.with(j)).exp();
            }
        }
        assert!((got - want.ln()).abs() < 1e-12);
    }

    #[test]
    fn full_depth_matches_exact() {
        let p = 7;
        let prior = uniform_size_prior(p);
        let ev = dataset(2, 40, p);
        let bf = bf_table(&ev).unwrap();
        let phi = compute_phi(&prior, &bf).unwrap();
        let (post, _) = posterior_pfs(&prior, &phi, &bf).unwrap();
        for m in enumerate_models(p).unwrap().filter(|m| m.size() < p) {
            let k = p - m.size();
            let mask = m.to_mask();
            assert!((phi_hat(&m, k, &prior, &ev).unwrap() - phi[mask]).abs() < 1e-10);
            assert!((phi_hat(&m, k + 3, &prior, &ev).unwrap() - phi[mask]).abs() < 1e-10);
            let node = ev.node(&m).unwrap();
            let q = proposal_at(&node, ProposalKind::Lip { k }, &prior, &ev).unwrap();
            assert!((q.rho_hat - post.rho_at(mask)).abs() < 1e-10);
            for (a, b) in q.lambda_hat(p).iter().zip(post.lambda_at(mask)) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn parent_consistent_with_children() {
        let p = 8;
        let prior = uniform_size_prior(p);
        let ev = dataset(3, 40, p);
        for k in 1..=4 {
            for m in enumerate_models(p).unwrap().filter(|m| m.size() < 3) {
                let node = ev.node(&m).unwrap();
                let q = proposal_at(&node, ProposalKind::Lip { k }, &prior, &ev).unwrap();
                let mut s = LogSum::new();
                s.add(q.rho.ln() + q.log_bf0);
                for c in &q.children {
                    s.add((1.0 - q.rho).ln() + c.log_lambda + c.log_phi_hat);
                    assert!(c.log_lambda > f64::NEG_INFINITY);
                }
                assert!((s.value() - q.log_phi_hat).abs() < 1e-10);
                assert!((phi_hat(&m, k, &prior, &ev).unwrap() - q.log_phi_hat).abs() < 1e-10);
                let total: f64 = q.lambda_hat(p).iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn error_shrinks_with_depth() {
        let p = 10;
        let prior = uniform_size_prior(p);
        let ev = dataset(4, 50, p);
        let bf = bf_table(&ev).unwrap();
        let phi = compute_phi(&prior, &bf).unwrap();
        let null = ModelVector::null(p);
        let errors: Vec<f64> = (1..=p)
            .map(|k| (phi_hat(&null, k, &prior, &ev).unwrap() - phi[0]).abs())
            .collect();
        for w in errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{errors:?}");
        }
        assert!(errors[p - 1] < 1e-10);
    }

    #[test]
    fn dominant_child_takes_the_mass() {
        let p = 4;
        let prior = uniform_size_prior(p);
        let ev = FnEvidence::new(p, |m: &ModelVector| if m.contains(2) { 40.0 } else { 0.0 });
        let node = ev.node(&ModelVector::null(p)).unwrap();
        let q = proposal_at(&node, ProposalKind::Lip { k: 1 }, &prior, &ev).unwrap();
        assert!(q.lambda_hat(p)[2] > 1.0 - 1e-12);
        assert!(q.rho_hat < 1e-12);
    }

    #[test]
    fn unselectable_children_force_stop() {
        let p = 2;
        let prior = uniform_size_prior(p);
        let ev = TableEvidence::new(p, vec![0.0, 0.0, 0.0, f64::NEG_INFINITY]).unwrap();
        let node = ev.node(&ModelVector::from_mask(p, 1)).unwrap();
        let q = proposal_at(&node, ProposalKind::Lip { k: 1 }, &prior, &ev).unwrap();
        assert!(q.forced_stop);
        assert_eq!(q.rho_hat, 1.0);
        assert_eq!(q.sample(0.99, 0.5), Decision::Stop);
        assert!((q.stop_log_ratio - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn prior_kind_ratios_are_zero() {
        let p = 5;
        let prior = uniform_size_prior(p);
        let ev = dataset(5, 20, p);
        let node = ev.node(&ModelVector::from_indices(p, &[1]).unwrap()).unwrap();
        let q = proposal_at(&node, ProposalKind::Prior, &prior, &ev).unwrap();
        assert_eq!(q.stop_log_ratio, 0.0);
        assert!(q.children.iter().all(|c| c.log_ratio.abs() < 1e-14));
    }
}
