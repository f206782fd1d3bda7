use std::fmt;
use std::sync::Arc;

use crate::bayes::{log_euler_integral, CoefficientPrior, RegressionData, RegressionState};
use crate::error::{domain, Result};
use crate::model::ModelVector;

/// What a [`DeltaEvaluator`] computes.
#[derive(Clone, Debug, PartialEq)]
pub enum DeltaKind {
    Inclusion(usize),
    Prediction,
    Custom(String),
}

/// `E(Δ | γ, D)` as a pure function of the model.
#[derive(Clone)]
pub struct DeltaEvaluator {
    kind: DeltaKind,
    f: Arc<dyn Fn(&ModelVector) -> f64 + Send + Sync>,
}

impl fmt::Debug for DeltaEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeltaEvaluator").field("kind", &self.kind).finish()
    }
}

impl DeltaEvaluator {
    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&ModelVector) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: DeltaKind::Custom(name.into()),
            f: Arc::new(f),
        }
    }

    pub fn kind(&self) -> &DeltaKind {
        &self.kind
    }

    pub fn eval(&self, model: &ModelVector) -> f64 {
        (self.f)(model)
    }
}

/// `1(γ_j = 1)`.
pub fn pip_delta(j: usize, p: usize) -> Result<DeltaEvaluator> {
    if j >= p {
        return domain(format!("predictor index {j} out of range for p = {p}"));
    }
    Ok(DeltaEvaluator {
        kind: DeltaKind::Inclusion(j),
        f: Arc::new(move |m: &ModelVector| if m.contains(j) { 1.0 } else { 0.0 }),
    })
}

/// `E[g/(1+g) | γ, D]` for a model of the given size and `R²`.
pub fn shrinkage(prior: &CoefficientPrior, r2: f64, size: usize, n: usize) -> f64 {
    match *prior {
        CoefficientPrior::G { g } => g / (1.0 + g),
        CoefficientPrior::HyperG { a } => {
            if size == 0 {
                return 0.0;
            }
            // With u = g/(1+g) the posterior of u is proportional to
            // (1−u)^{(s+a)/2−2} (1−uR²)^{−(n−1)/2}.
            let r2 = r2.clamp(0.0, crate::bayes::R2_CEILING);
            let big_a = (n as f64 - 1.0) / 2.0;
            let c = (size as f64 + a) / 2.0;
            let num = log_euler_integral(big_a, 2.0, c + 1.0, r2);
            let den = log_euler_integral(big_a, 1.0, c, r2);
            (num - den).exp().clamp(0.0, 1.0)
        }
    }
}

/// Posterior mean of the regression function under one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFit {
    pub intercept: f64,
    /// `(predictor, shrunken coefficient)` on the original scale.
    pub coefficients: Vec<(usize, f64)>,
    pub shrinkage: f64,
}

impl ModelFit {
    pub fn new(data: &RegressionData, prior: &CoefficientPrior, model: &ModelVector) -> Result<Self> {
        let state = RegressionState::for_model(data, model)?;
        let k = shrinkage(prior, state.r2(), state.size(), data.n());
        let coefficients: Vec<(usize, f64)> = state.coefficients().into_iter().map(|(j, b)| (j, k * b)).collect();
        let xm = data.x_mean();
        let intercept = data.y_mean() - coefficients.iter().map(|&(j, b)| b * xm[j]).sum::<f64>();
        Ok(Self {
            intercept,
            coefficients,
            shrinkage: k,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().map(|&(j, b)| b * x[j]).sum::<f64>()
    }
}

/// `E(Y_new | γ, D)` at the raw covariate row `x_new`.
pub fn prediction_delta(
    data: Arc<RegressionData>,
    prior: CoefficientPrior,
    x_new: &[f64],
) -> Result<DeltaEvaluator> {
    if x_new.len() != data.p() {
        return domain(format!(
            "new row has {} values, expected {}",
            x_new.len(),
            data.p()
        ));
    }
    let x = x_new.to_vec();
    Ok(DeltaEvaluator {
        kind: DeltaKind::Prediction,
        f: Arc::new(move |m: &ModelVector| {
            ModelFit::new(&data, &prior, m).map_or(f64::NAN, |fit| fit.predict(&x))
        }),
    })
}
