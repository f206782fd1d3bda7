use std::sync::Arc;

use super::{PfsPrior, SelectionRule, StoppingRule};
use crate::error::{domain, Result};
use crate::model::ModelVector;

/// `λ_j(γ) = 1/(p - |γ|)` for every excluded `j`.
#[derive(Clone, Debug)]
pub struct UniformSelection {
    p: usize,
}

impl UniformSelection {
    pub fn new(p: usize) -> Self {
        Self { p }
    }
}

impl SelectionRule for UniformSelection {
    fn weights(&self, _model: &ModelVector, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.p);
        out.iter_mut().for_each(|w| *w = 1.0);
    }
}

pub fn uniform_selection(p: usize) -> Result<UniformSelection> {
    if p == 0 {
        return domain("uniform selection needs at least one predictor");
    }
    Ok(UniformSelection::new(p))
}

/// Base weights `w_j`, multiplied by `c` for a boosted subset.
#[derive(Clone, Debug)]
pub struct WeightedSelection {
    weights: Vec<f64>,
}

impl WeightedSelection {
    pub fn new(weights: Vec<f64>, boosted: &[usize], factor: f64) -> Result<Self> {
        if !(factor >= 1.0) {
            return domain(format!("boost factor must be at least 1, got {factor}"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return domain("selection weights must be finite and nonnegative");
        }
        let mut weights = weights;
        for &j in boosted {
            match weights.get_mut(j) {
                Some(w) => *w *= factor,
                None => return domain(format!("boosted index {j} out of range")),
            }
        }
        Ok(Self { weights })
    }
}

impl SelectionRule for WeightedSelection {
    fn weights(&self, _model: &ModelVector, out: &mut [f64]) {
        out.copy_from_slice(&self.weights);
    }
}

pub fn weighted_selection(weights: Vec<f64>, boosted: &[usize], factor: f64) -> Result<WeightedSelection> {
    WeightedSelection::new(weights, boosted, factor)
}

/// A rule tying a predictor's selection weight to the current model.
#[derive(Clone, Debug, PartialEq)]
pub enum ConditionalRule {
    /// Multiply `λ_target` by `factor` when any trigger is in the model.
    Boost {
        triggers: Vec<usize>,
        target: usize,
        factor: f64,
    },
    /// `λ_target = 0` unless every parent is in the model (interaction terms
    /// enter only after their main effects).
    Requires { parents: Vec<usize>, target: usize },
}

pub struct ConditionalSelection {
    base: Arc<dyn SelectionRule>,
    rules: Vec<ConditionalRule>,
}

impl SelectionRule for ConditionalSelection {
    fn weights(&self, model: &ModelVector, out: &mut [f64]) {
        self.base.weights(model, out);
        for rule in &self.rules {
            match rule {
                ConditionalRule::Boost {
                    triggers,
                    target,
                    factor,
                } => {
                    if triggers.iter().any(|&i| model.contains(i)) {
                        out[*target] *= factor;
                    }
                }
                ConditionalRule::Requires { parents, target } => {
                    if !parents.iter().all(|&i| model.contains(i)) {
                        out[*target] = 0.0;
                    }
                }
            }
        }
    }
}

pub fn conditional_selection(
    base: Arc<dyn SelectionRule>,
    p: usize,
    rules: Vec<ConditionalRule>,
) -> Result<ConditionalSelection> {
    for rule in &rules {
        let (indices, target, factor) = match rule {
            ConditionalRule::Boost {
                triggers,
                target,
                factor,
            } => (triggers, *target, *factor),
            ConditionalRule::Requires { parents, target } => (parents, *target, 0.0),
        };
        if target >= p || indices.iter().any(|&i| i >= p) {
            return domain("conditional rule index out of range");
        }
        if !(factor >= 0.0) || !factor.is_finite() {
            return domain(format!("conditional factor must be nonnegative, got {factor}"));
        }
    }
    Ok(ConditionalSelection { base, rules })
}

fn partial_block<'a>(blocks: &'a [Vec<usize>], model: &ModelVector) -> Option<&'a [usize]> {
    blocks.iter().map(Vec::as_slice).find(|block| {
        let inside = block.iter().filter(|&&j| model.contains(j)).count();
        inside > 0 && inside < block.len()
    })
}

/// Stopping half of a block rule: never stop inside a partially included block.
pub struct BlockStopping {
    base: Arc<dyn StoppingRule>,
    blocks: Arc<Vec<Vec<usize>>>,
}

impl StoppingRule for BlockStopping {
    fn rho(&self, model: &ModelVector) -> f64 {
        if partial_block(&self.blocks, model).is_some() {
            0.0
        } else {
            self.base.rho(model)
        }
    }

    fn max_size(&self) -> usize {
        self.base.max_size()
    }
}

/// Selection half of a block rule: uniform over the missing members of a
/// partially included block.
pub struct BlockSelection {
    base: Arc<dyn SelectionRule>,
    blocks: Arc<Vec<Vec<usize>>>,
}

impl SelectionRule for BlockSelection {
    fn weights(&self, model: &ModelVector, out: &mut [f64]) {
        match partial_block(&self.blocks, model) {
            Some(block) => {
                out.iter_mut().for_each(|w| *w = 0.0);
                for &j in block {
                    if !model.contains(j) {
                        out[j] = 1.0;
                    }
                }
            }
            None => self.base.weights(model, out),
        }
    }
}

/// Wraps a prior so that the given disjoint blocks enter the model whole.
pub fn block_rule(prior: &PfsPrior, blocks: Vec<Vec<usize>>) -> Result<PfsPrior> {
    let p = prior.p();
    let mut seen = vec![false; p];
    for block in &blocks {
        if block.is_empty() {
            return domain("empty block");
        }
        for &j in block {
            if j >= p {
                return domain(format!("block index {j} out of range"));
            }
            if std::mem::replace(&mut seen[j], true) {
                return domain(format!("predictor {j} appears in more than one block"));
            }
        }
    }
    let blocks = Arc::new(blocks);
    let stopping = BlockStopping {
        base: prior.stopping().clone(),
        blocks: blocks.clone(),
    };
    let selection = BlockSelection {
        base: prior.selection().clone(),
        blocks,
    };
    // The size cap stays on the outer prior. A cap that cuts through a block
    // stops the chain with the block half included.
    Ok(PfsPrior::new(p, Arc::new(stopping), Arc::new(selection)).with_max_size(prior.max_size()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{marginal_table, simulate_pfs, uniform_size_prior, SizeStopping};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mv(s: &str) -> ModelVector {
        s.parse().unwrap()
    }

    fn prior_with(p: usize, sel: Arc<dyn SelectionRule>) -> PfsPrior {
        PfsPrior::new(p, Arc::new(SizeStopping::new(vec![0.5; p + 1])), sel)
    }

    fn assert_close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-14, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn uniform_cases() {
        let prior = prior_with(4, Arc::new(UniformSelection::new(4)));
        assert_close(&prior.lambda(&mv("0000")).unwrap(), &[0.25; 4]);
        assert_close(&prior.lambda(&mv("1010")).unwrap(), &[0.0, 0.5, 0.0, 0.5]);
        assert_close(&prior.lambda(&mv("1101")).unwrap(), &[0.0, 0.0, 1.0, 0.0]);
        assert!(uniform_selection(0).is_err());
    }

    #[test]
    fn weighted_cases() {
        let unit = prior_with(3, Arc::new(weighted_selection(vec![1.0; 3], &[], 1.0).unwrap()));
        let uni = prior_with(3, Arc::new(UniformSelection::new(3)));
        for m in crate::model::enumerate_models(3).unwrap().filter(|m| !m.is_full()) {
            assert_close(&unit.lambda(&m).unwrap(), &uni.lambda(&m).unwrap());
        }

        let boosted = prior_with(3, Arc::new(weighted_selection(vec![1.0; 3], &[0], 2.0).unwrap()));
        assert_close(&boosted.lambda(&mv("000")).unwrap(), &[0.5, 0.25, 0.25]);
        assert_close(&boosted.lambda(&mv("100")).unwrap(), &[0.0, 0.5, 0.5]);
        assert!(weighted_selection(vec![1.0; 3], &[0], 0.5).is_err());
    }

    #[test]
    fn conditional_cases() {
        let p = 4;
        let base: Arc<dyn SelectionRule> = Arc::new(UniformSelection::new(p));
        // Pathway {0, 2} boosts predictor 1 by 2.
        let pathway = conditional_selection(
            base.clone(),
            p,
            vec![ConditionalRule::Boost {
                triggers: vec![0, 2],
                target: 1,
                factor: 2.0,
            }],
        )
        .unwrap();
        let prior = prior_with(p, Arc::new(pathway));
        assert_close(&prior.lambda(&mv("1000")).unwrap(), &[0.0, 0.5, 0.25, 0.25]);
        // Untriggered: unchanged from the base rule.
        assert_close(&prior.lambda(&mv("0001")).unwrap(), &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);

        // Predictor 3 is the interaction of 0 and 1.
        let inter = conditional_selection(
            base,
            p,
            vec![ConditionalRule::Requires {
                parents: vec![0, 1],
                target: 3,
            }],
        )
        .unwrap();
        let prior = prior_with(p, Arc::new(inter));
        assert_eq!(prior.lambda(&mv("0100")).unwrap()[3], 0.0);
        assert_eq!(prior.lambda(&mv("1000")).unwrap()[3], 0.0);
        assert_close(&prior.lambda(&mv("1100")).unwrap(), &[0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn conditional_dead_end_is_reported() {
        let p = 2;
        // Each predictor requires the other: nothing is selectable from null.
        let rule = conditional_selection(
            Arc::new(UniformSelection::new(p)),
            p,
            vec![
                ConditionalRule::Requires { parents: vec![1], target: 0 },
                ConditionalRule::Requires { parents: vec![0], target: 1 },
            ],
        )
        .unwrap();
        let prior = prior_with(p, Arc::new(rule));
        assert!(matches!(
            prior.lambda(&mv("00")),
            Err(crate::error::LipsError::Config(_))
        ));
    }

    #[test]
    fn block_cases() {
        let p = 5;
        let base = uniform_size_prior(p);
        let prior = block_rule(&base, vec![vec![1, 2]]).unwrap();
        let g = mv("01000");
        assert_eq!(prior.rho(&g), 0.0);
        assert_close(&prior.lambda(&g).unwrap(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        let g = mv("10001");
        assert_eq!(prior.rho(&g), base.rho(&g));
        assert_close(&prior.lambda(&g).unwrap(), &base.lambda(&g).unwrap());

        let prior = block_rule(&base, vec![vec![0, 1, 2]]).unwrap();
        assert_close(&prior.lambda(&mv("10000")).unwrap(), &[0.0, 0.5, 0.5, 0.0, 0.0]);

        assert!(block_rule(&base, vec![vec![0, 1], vec![1, 2]]).is_err());
    }

    #[test]
    fn block_prior_never_ends_partial() {
        let p = 5;
        let blocks = vec![vec![0, 3], vec![1, 2, 4]];
        let prior = block_rule(&uniform_size_prior(p), blocks.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let (m, _) = simulate_pfs(&prior, &mut rng).unwrap();
            assert!(partial_block(&blocks, &m).is_none(), "{m}");
        }
        let table = marginal_table(&prior).unwrap();
        let total: f64 = table.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (mask, &v) in table.iter().enumerate() {
            if partial_block(&blocks, &ModelVector::from_mask(p, mask)).is_some() {
                assert_eq!(v, 0.0);
            }
        }
    }
}
