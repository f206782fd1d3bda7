use std::collections::HashMap;

use super::delta::DeltaEvaluator;
use super::engine::{LipsRun, Sample};
use crate::error::{LipsError, Result};
use crate::model::ModelVector;

/// Weighted estimate of a posterior expectation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HtEstimate {
    pub value: f64,
    pub se: f64,
    pub ess: f64,
    /// Number of islands combined; 1 for a single weighted sample.
    pub islands: usize,
}

fn stabilized(log_weights: &[f64]) -> Result<Vec<f64>> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if log_weights.is_empty() || max == f64::NEG_INFINITY || max.is_nan() {
        return Err(LipsError::Numeric("all importance weights are zero".into()));
    }
    if max == f64::INFINITY {
        return Err(LipsError::Numeric("infinite importance weight".into()));
    }
    Ok(log_weights.iter().map(|l| (l - max).exp()).collect())
}

/// `(Σw)² / Σw²`.
pub fn effective_sample_size(log_weights: &[f64]) -> Result<f64> {
    let w = stabilized(log_weights)?;
    let (s, s2) = w.iter().fold((0.0, 0.0), |(a, b), v| (a + v, b + v * v));
    Ok(s * s / s2)
}

/// Ratio estimate `ΣW_iΔ_i / ΣW_i` with its delta-method standard error.
pub fn ht_from_values(log_weights: &[f64], values: &[f64]) -> Result<HtEstimate> {
    if log_weights.len() != values.len() {
        return Err(LipsError::Domain("weights and values differ in length".into()));
    }
    let w = stabilized(log_weights)?;
    let n = w.len();
    let (mut sw, mut sz, mut sw2) = (0.0, 0.0, 0.0);
    for (wi, vi) in w.iter().zip(values) {
        if *wi > 0.0 {
            if !vi.is_finite() {
                return Err(LipsError::Numeric(format!("estimand evaluated to {vi}")));
            }
            sz += wi * vi;
        }
        sw += wi;
        sw2 += wi * wi;
    }
    let value = sz / sw;
    let se = if n < 2 {
        f64::INFINITY
    } else {
        // With Z_i = W_iΔ_i and Z̄ = δW̄ the three-term variance reduces to
        // Σ(Z_i − δW_i)²/(N−1), divided by N·W̄².
        let ss: f64 = w
            .iter()
            .zip(values)
            .filter(|(wi, _)| **wi > 0.0)
            .map(|(wi, vi)| (wi * (vi - value)).powi(2))
            .sum();
        let wbar = sw / n as f64;
        (ss / ((n - 1) as f64 * n as f64 * wbar * wbar)).sqrt()
    };
    Ok(HtEstimate {
        value,
        se,
        ess: sw * sw / sw2,
        islands: 1,
    })
}

/// Horvitz-Thompson estimate of `E(Δ | D)`. `delta` is evaluated once per
/// distinct model.
pub fn ht_estimate(samples: &[Sample], delta: &DeltaEvaluator) -> Result<HtEstimate> {
    let mut cache: HashMap<&ModelVector, f64> = HashMap::new();
    let values: Vec<f64> = samples
        .iter()
        .map(|s| *cache.entry(&s.model).or_insert_with(|| delta.eval(&s.model)))
        .collect();
    let logs: Vec<f64> = samples.iter().map(|s| s.log_weight).collect();
    ht_from_values(&logs, &values)
}

/// Average of per-island estimates with the between-island standard error.
/// A single island is returned as is.
pub fn islanded_estimate(estimates: &[HtEstimate]) -> Result<HtEstimate> {
    let l = estimates.len();
    match l {
        0 => Err(LipsError::Domain("no island estimates".into())),
        1 => Ok(estimates[0]),
        _ => {
            let mean = estimates.iter().map(|e| e.value).sum::<f64>() / l as f64;
            let ss: f64 = estimates.iter().map(|e| (e.value - mean).powi(2)).sum();
            Ok(HtEstimate {
                value: mean,
                se: (ss / (l * (l - 1)) as f64).sqrt(),
                ess: estimates.iter().map(|e| e.ess).sum(),
                islands: l,
            })
        }
    }
}

/// Per-predictor inclusion estimates from one island.
pub fn pip_estimates(samples: &[Sample], p: usize) -> Result<Vec<HtEstimate>> {
    let logs: Vec<f64> = samples.iter().map(|s| s.log_weight).collect();
    let mut values = vec![0.0; samples.len()];
    (0..p)
        .map(|j| {
            for (v, s) in values.iter_mut().zip(samples) {
                *v = if s.model.contains(j) { 1.0 } else { 0.0 };
            }
            ht_from_values(&logs, &values)
        })
        .collect()
}

/// Islanded inclusion estimates for every predictor.
pub fn islanded_pips(run: &LipsRun, p: usize) -> Result<Vec<HtEstimate>> {
    let per_island: Vec<Vec<HtEstimate>> = run
        .islands
        .iter()
        .map(|i| pip_estimates(&i.samples, p))
        .collect::<Result<_>>()?;
    (0..p)
        .map(|j| {
            let col: Vec<HtEstimate> = per_island.iter().map(|e| e[j]).collect();
            islanded_estimate(&col)
        })
        .collect()
}

/// Islanded estimate of an arbitrary delta.
pub fn islanded_delta(run: &LipsRun, delta: &DeltaEvaluator) -> Result<HtEstimate> {
    let per_island: Vec<HtEstimate> = run
        .islands
        .iter()
        .map(|i| ht_estimate(&i.samples, delta))
        .collect::<Result<_>>()?;
    islanded_estimate(&per_island)
}
