//! Metropolis-Hastings over model space with add, delete and swap moves.

use std::collections::HashMap;

use rand::Rng;
use statrs::function::factorial::ln_binomial;

use crate::bayes::Evidence;
use crate::error::{LipsError, Result};
use crate::model::ModelVector;
use crate::prior::{marginal_table, PfsPrior};
use crate::rng::stream;

/// Pointwise `ln π(γ)`.
#[derive(Clone, Debug)]
pub enum ModelPriorDensity {
    /// Symmetric prior with size distribution `q`.
    Symmetric { q: Vec<f64> },
    /// Marginal probabilities indexed by bitmask.
    Table { p: usize, probs: Vec<f64> },
}

impl ModelPriorDensity {
    /// Uses the closed form for symmetric priors and the DP table otherwise
    /// (`p <= 20` only).
    pub fn from_prior(prior: &PfsPrior) -> Result<Self> {
        if let Some(q) = prior.symmetric_sizes() {
            return Ok(Self::Symmetric { q: q.to_vec() });
        }
        let probs = marginal_table(prior).map_err(|_| {
            LipsError::Config(format!(
                "MC3 needs a symmetric prior or p <= 20 for a non-symmetric one (p = {})",
                prior.p()
            ))
        })?;
        Ok(Self::Table { p: prior.p(), probs })
    }

    pub fn p(&self) -> usize {
        match self {
            Self::Symmetric { q } => q.len() - 1,
            Self::Table { p, .. } => *p,
        }
    }

    pub fn log_prob(&self, model: &ModelVector) -> f64 {
        match self {
            Self::Symmetric { q } => {
                let s = model.size();
                q[s].ln() - ln_binomial(self.p() as u64, s as u64)
            }
            Self::Table { probs, .. } => probs[model.to_mask()].ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mc3Config {
    pub iterations: usize,
    pub burnin: usize,
    pub seed: u64,
    /// Start of the chain; the null model when absent.
    pub start: Option<ModelVector>,
    /// Keep the post-burn-in chain in the result.
    pub keep_chain: bool,
    /// Batches for the batch-means standard errors.
    pub batches: usize,
}

impl Mc3Config {
    pub fn new(iterations: usize, burnin: usize, seed: u64) -> Self {
        Self {
            iterations,
            burnin,
            seed,
            start: None,
            keep_chain: false,
            batches: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mc3Result {
    pub pips: Vec<f64>,
    /// Batch-means standard errors of `pips`.
    pub se: Vec<f64>,
    pub acceptance_rate: f64,
    /// Post-burn-in states, when requested.
    pub chain: Vec<ModelVector>,
    /// Distinct models whose Bayes factor was evaluated.
    pub evaluated: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Move {
    Add,
    Delete,
    Swap,
}

fn feasible(size: usize, p: usize) -> Vec<Move> {
    let mut out = Vec::with_capacity(3);
    if size < p {
        out.push(Move::Add);
    }
    if size > 0 {
        out.push(Move::Delete);
    }
    if size > 0 && size < p {
        out.push(Move::Swap);
    }
    out
}

/// `ln q(γ → γ')` for a move of the given type out of a model of size `s`.
fn log_move_prob(mv: Move, s: usize, p: usize) -> f64 {
    let types = feasible(s, p).len() as f64;
    let count = match mv {
        Move::Add => (p - s) as f64,
        Move::Delete => s as f64,
        Move::Swap => (s * (p - s)) as f64,
    };
    -(types.ln() + count.ln())
}

fn nth<I: Iterator<Item = usize>>(mut it: I, k: usize) -> usize {
    it.nth(k).expect("index within range")
}

/// Runs one chain. PIPs are post-burn-in inclusion frequencies.
pub fn mc3_run<E: Evidence>(evidence: &E, prior: &ModelPriorDensity, config: &Mc3Config) -> Result<Mc3Result> {
    let p = evidence.p();
    if p == 0 {
        return Err(LipsError::Config("MC3 needs at least one predictor".into()));
    }
    if prior.p() != p {
        return Err(LipsError::Config(format!(
            "prior has {} predictors but the data has {p}",
            prior.p()
        )));
    }
    if config.iterations <= config.burnin {
        return Err(LipsError::Config("iterations must exceed burn-in".into()));
    }
    let mut rng = stream(config.seed, 0);
    let mut cache: HashMap<ModelVector, f64> = HashMap::new();
    let mut target = |m: &ModelVector| -> f64 {
        if let Some(&v) = cache.get(m) {
            return v;
        }
        let lp = prior.log_prob(m);
        let v = if lp == f64::NEG_INFINITY {
            lp
        } else {
            lp + evidence.log_bf0(m)
        };
        cache.insert(m.clone(), v);
        v
    };

    let mut current = config.start.clone().unwrap_or_else(|| ModelVector::null(p));
    let mut current_target = target(&current);
    if current_target == f64::NEG_INFINITY {
        return Err(LipsError::Config("chain starts at a model with zero posterior mass".into()));
    }

    let kept = config.iterations - config.burnin;
    let batches = config.batches.clamp(1, kept);
    let batch_len = kept / batches;
    let mut counts = vec![0u64; p];
    let mut batch_counts = vec![vec![0u64; p]; batches];
    let mut chain = Vec::new();
    let mut accepted = 0usize;

    for it in 0..config.iterations {
        let s = current.size();
        let moves = feasible(s, p);
        let mv = moves[rng.random_range(0..moves.len())];
        let (proposal, reverse, s_new) = match mv {
            Move::Add => {
                let j = nth(current.zeros(), rng.random_range(0..p - s));
                (current.with(j), Move::Delete, s + 1)
            }
            Move::Delete => {
                let j = nth(current.ones(), rng.random_range(0..s));
                (current.without(j), Move::Add, s - 1)
            }
            Move::Swap => {
                let out = nth(current.ones(), rng.random_range(0..s));
                let inn = nth(current.zeros(), rng.random_range(0..p - s));
                (current.without(out).with(inn), Move::Swap, s)
            }
        };
        let proposal_target = target(&proposal);
        let log_alpha = proposal_target - current_target + log_move_prob(reverse, s_new, p)
            - log_move_prob(mv, s, p);
        let u: f64 = rng.random();
        if proposal_target > f64::NEG_INFINITY && u.ln() < log_alpha {
            current = proposal;
            current_target = proposal_target;
            accepted += 1;
        }
        if it >= config.burnin {
            let k = it - config.burnin;
            let b = (k / batch_len).min(batches - 1);
            for j in current.ones() {
                counts[j] += 1;
                batch_counts[b][j] += 1;
            }
            if config.keep_chain {
                chain.push(current.clone());
            }
        }
    }

    let pips: Vec<f64> = counts.iter().map(|&c| c as f64 / kept as f64).collect();
    let se = (0..p)
        .map(|j| {
            if batches < 2 {
                return f64::INFINITY;
            }
            let means: Vec<f64> = (0..batches)
                .map(|b| {
                    let len = if b == batches - 1 {
                        kept - batch_len * (batches - 1)
                    } else {
                        batch_len
                    };
                    batch_counts[b][j] as f64 / len as f64
                })
                .collect();
            let m = means.iter().sum::<f64>() / batches as f64;
            let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
            (var / batches as f64).sqrt()
        })
        .collect();
    Ok(Mc3Result {
        pips,
        se,
        acceptance_rate: accepted as f64 / config.iterations as f64,
        chain,
        evaluated: cache.len(),
    })
}
