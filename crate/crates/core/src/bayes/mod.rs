//! Bayes factors against the null model for Gaussian linear regression with
//! an intercept, under Zellner's g-prior or the hyper-g prior, plus the
//! [`Evidence`] abstraction the samplers consume.

mod data;
mod hypergeometric;
pub(crate) mod quadrature;
mod state;

use std::sync::Arc;

use crate::error::{domain, Result};
use crate::model::ModelVector;

pub use data::RegressionData;
pub(crate) use hypergeometric::log_euler_integral;
pub use hypergeometric::{gauss_2f1, log_gauss_2f1};
pub use state::{extend_state, RegressionState};

/// `R²` is clamped to this before evaluating a Bayes factor.
pub const R2_CEILING: f64 = 1.0 - 1e-12;

/// Prior on the regression coefficients of a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoefficientPrior {
    /// Zellner's g-prior with fixed `g > 0`.
    G { g: f64 },
    /// Hyper-g prior: `g/(1+g) ~ Beta(1, a/2 - 1)`, `a > 2`.
    HyperG { a: f64 },
}

impl CoefficientPrior {
    pub fn g_prior(g: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return domain(format!("g must be positive, got {g}"));
        }
        Ok(Self::G { g })
    }

    pub fn hyper_g(a: f64) -> Result<Self> {
        if !(a > 2.0 && a.is_finite()) {
            return domain(format!("hyper-g parameter a must exceed 2, got {a}"));
        }
        Ok(Self::HyperG { a })
    }

    /// g-prior with `g = n`.
    pub fn unit_information(n: usize) -> Self {
        Self::G { g: n as f64 }
    }

    /// `ln BF_0` of a model of the given size and `R²` fitted to `n`
    /// observations.
    pub fn log_bf0(&self, r2: f64, size: usize, n: usize) -> f64 {
        if size == 0 {
            return 0.0;
        }
        let r2 = r2.clamp(0.0, R2_CEILING);
        let (n, s) = (n as f64, size as f64);
        match *self {
            Self::G { g } => {
                0.5 * (n - 1.0 - s) * g.ln_1p() - 0.5 * (n - 1.0) * (1.0 + g * (1.0 - r2)).ln()
            }
            Self::HyperG { a } => {
                let c = 0.5 * (s + a);
                let f = log_gauss_2f1(0.5 * (n - 1.0), 1.0, c, r2).unwrap_or(f64::NAN);
                ((a - 2.0) / (s + a - 2.0)).ln() + f
            }
        }
    }
}

/// `ln BF_0(γ)` under the g-prior.
pub fn log_bf0_g(state: &RegressionState, n: usize, g: f64) -> f64 {
    CoefficientPrior::G { g }.log_bf0(state.r2(), state.size(), n)
}

/// `ln BF_0(γ)` under the hyper-g prior.
pub fn log_bf0_hyperg(state: &RegressionState, n: usize, a: f64) -> f64 {
    CoefficientPrior::HyperG { a }.log_bf0(state.r2(), state.size(), n)
}

/// `ln BF(γ_t, γ_{t-1}) = ln BF_0(γ_t) - ln BF_0(γ_{t-1})`.
pub fn log_bf_step(
    next: &RegressionState,
    prev: &RegressionState,
    prior: &CoefficientPrior,
    n: usize,
) -> f64 {
    if next.model() == prev.model() {
        return 0.0;
    }
    prior.log_bf0(next.r2(), next.size(), n) - prior.log_bf0(prev.r2(), prev.size(), n)
}

/// Source of `ln BF_0` values for the model-space algorithms.
///
/// A `Node` is whatever an implementation needs to evaluate a model and its
/// one-predictor extensions cheaply; for regression it carries the factorized
/// fit so look-ahead trees extend states instead of refitting.
pub trait Evidence: Send + Sync {
    type Node: Clone + Send + Sync;

    fn p(&self) -> usize;

    /// `None` when the model cannot be fitted (collinear or too large).
    fn node(&self, model: &ModelVector) -> Option<Self::Node>;

    fn node_model<'a>(&self, node: &'a Self::Node) -> &'a ModelVector;

    fn node_log_bf0(&self, node: &Self::Node) -> f64;

    fn extend(&self, node: &Self::Node, j: usize) -> Option<Self::Node>;

    /// Writes `ln BF_0(γ+j)` for every `j` into `out`, `-∞` for included or
    /// unusable extensions.
    fn children_log_bf0(&self, node: &Self::Node, out: &mut [f64]) {
        let model = self.node_model(node).clone();
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = if model.contains(j) {
                f64::NEG_INFINITY
            } else {
                self.extend(node, j)
                    .map_or(f64::NEG_INFINITY, |c| self.node_log_bf0(&c))
            };
        }
    }

    /// `ln BF_0(γ+j)`, with `ln BF_0(γ+j+l)` for every `l` written into
    /// `out`. `None` when `γ+j` is unusable.
    fn extension_children_log_bf0(&self, node: &Self::Node, j: usize, out: &mut [f64]) -> Option<f64> {
        let child = self.extend(node, j)?;
        self.children_log_bf0(&child, out);
        Some(self.node_log_bf0(&child))
    }

    fn log_bf0(&self, model: &ModelVector) -> f64 {
        self.node(model)
            .map_or(f64::NEG_INFINITY, |node| self.node_log_bf0(&node))
    }
}

/// Regression state with its Bayes factor.
#[derive(Clone, Debug)]
pub struct RegressionNode {
    pub state: RegressionState,
    pub log_bf0: f64,
}

/// Bayes factors of a regression dataset under a coefficient prior. Models
/// larger than `n - 2` or with collinear columns are unusable.
#[derive(Clone, Debug)]
pub struct RegressionEvidence {
    data: Arc<RegressionData>,
    prior: CoefficientPrior,
}

impl RegressionEvidence {
    pub fn new(data: Arc<RegressionData>, prior: CoefficientPrior) -> Self {
        Self { data, prior }
    }

    pub fn data(&self) -> &Arc<RegressionData> {
        &self.data
    }

    pub fn prior(&self) -> &CoefficientPrior {
        &self.prior
    }

    fn size_limit(&self) -> usize {
        self.data.n() - 2
    }

    fn wrap(&self, state: RegressionState) -> RegressionNode {
        let log_bf0 = self.prior.log_bf0(state.r2(), state.size(), self.data.n());
        RegressionNode { state, log_bf0 }
    }
}

impl Evidence for RegressionEvidence {
    type Node = RegressionNode;

    fn p(&self) -> usize {
        self.data.p()
    }

    fn node(&self, model: &ModelVector) -> Option<RegressionNode> {
        if model.size() > self.size_limit() {
            return None;
        }
        RegressionState::for_model(&self.data, model)
            .ok()
            .map(|s| self.wrap(s))
    }

    fn node_model<'a>(&self, node: &'a RegressionNode) -> &'a ModelVector {
        node.state.model()
    }

    fn node_log_bf0(&self, node: &RegressionNode) -> f64 {
        node.log_bf0
    }

    fn extend(&self, node: &RegressionNode, j: usize) -> Option<RegressionNode> {
        if node.state.size() + 1 > self.size_limit() || node.state.model().contains(j) {
            return None;
        }
        node.state.extend(&self.data, j).ok().map(|s| self.wrap(s))
    }

    fn children_log_bf0(&self, node: &RegressionNode, out: &mut [f64]) {
        let size = node.state.size() + 1;
        if size > self.size_limit() {
            out.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
            return;
        }
        let mut r2 = vec![None; self.data.p()];
        node.state.children_r2(&self.data, &mut r2);
        self.fill_log_bf0(size, &r2, out);
    }

    fn extension_children_log_bf0(&self, node: &RegressionNode, j: usize, out: &mut [f64]) -> Option<f64> {
        let size = node.state.size() + 1;
        if size > self.size_limit() || node.state.model().contains(j) {
            return None;
        }
        let mut row = Vec::with_capacity(self.data.p());
        let mut r2 = vec![None; self.data.p()];
        let r2j = node.state.extension_children_r2(&self.data, j, &mut row, &mut r2).ok()?;
        if size + 1 > self.size_limit() {
            out.iter_mut().for_each(|v| *v = f64::NEG_INFINITY);
        } else {
            self.fill_log_bf0(size + 1, &r2, out);
        }
        Some(self.prior.log_bf0(r2j, size, self.data.n()))
    }
}

impl RegressionEvidence {
    /// `ln BF_0` of same-size models from their `R²` (`None` is unusable).
    fn fill_log_bf0(&self, size: usize, r2: &[Option<f64>], out: &mut [f64]) {
        let n = self.data.n();
        match self.prior {
            CoefficientPrior::G { g } => {
                // The size term is shared by every model.
                let nf = n as f64;
                let base = 0.5 * (nf - 1.0 - size as f64) * g.ln_1p();
                for (slot, r) in out.iter_mut().zip(r2) {
                    *slot = r.map_or(f64::NEG_INFINITY, |r| {
                        base - 0.5 * (nf - 1.0) * (1.0 + g * (1.0 - r.clamp(0.0, R2_CEILING))).ln()
                    });
                }
            }
            CoefficientPrior::HyperG { .. } => {
                for (slot, r) in out.iter_mut().zip(r2) {
                    *slot = r.map_or(f64::NEG_INFINITY, |r| self.prior.log_bf0(r, size, n));
                }
            }
        }
    }
}

/// Bayes factors read from a table indexed by bitmask (`p <= 20`).
#[derive(Clone, Debug)]
pub struct TableEvidence {
    p: usize,
    log_bf0: Vec<f64>,
}

impl TableEvidence {
    pub fn new(p: usize, log_bf0: Vec<f64>) -> Result<Self> {
        crate::model::check_enumerable(p)?;
        if log_bf0.len() != 1 << p {
            return domain(format!("table has {} entries, expected 2^{p}", log_bf0.len()));
        }
        Ok(Self { p, log_bf0 })
    }

    /// `BF_0 ≡ 1`.
    pub fn flat(p: usize) -> Result<Self> {
        Self::new(p, vec![0.0; 1 << p])
    }

    pub fn table(&self) -> &[f64] {
        &self.log_bf0
    }
}

impl Evidence for TableEvidence {
    type Node = ModelVector;

    fn p(&self) -> usize {
        self.p
    }

    fn node(&self, model: &ModelVector) -> Option<ModelVector> {
        self.log_bf0[model.to_mask()]
            .is_finite()
            .then(|| model.clone())
    }

    fn node_model<'a>(&self, node: &'a ModelVector) -> &'a ModelVector {
        node
    }

    fn node_log_bf0(&self, node: &ModelVector) -> f64 {
        self.log_bf0[node.to_mask()]
    }

    fn extend(&self, node: &ModelVector, j: usize) -> Option<ModelVector> {
        let child = node.with(j);
        self.log_bf0[child.to_mask()].is_finite().then_some(child)
    }
}

/// Bayes factors from a closure, for stubs and experiments at any `p`.
pub struct FnEvidence<F> {
    p: usize,
    f: F,
}

impl<F: Fn(&ModelVector) -> f64 + Send + Sync> FnEvidence<F> {
    pub fn new(p: usize, f: F) -> Self {
        Self { p, f }
    }
}

impl<F: Fn(&ModelVector) -> f64 + Send + Sync> Evidence for FnEvidence<F> {
    type Node = (ModelVector, f64);

    fn p(&self) -> usize {
        self.p
    }

    fn node(&self, model: &ModelVector) -> Option<(ModelVector, f64)> {
        let v = (self.f)(model);
        v.is_finite().then(|| (model.clone(), v))
    }

    fn node_model<'a>(&self, node: &'a (ModelVector, f64)) -> &'a ModelVector {
        &node.0
    }

    fn node_log_bf0(&self, node: &(ModelVector, f64)) -> f64 {
        node.1
    }

    fn extend(&self, node: &(ModelVector, f64), j: usize) -> Option<(ModelVector, f64)> {
        self.node(&node.0.with(j))
    }
}
