use std::collections::HashMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::dataset::Dataset;
use super::simulate::ase;
use super::spec::{CoefSpec, PriorSpec};
use crate::bayes::{CoefficientPrior, RegressionData, RegressionEvidence};
use crate::error::{LipsError, Result};
use crate::lips::{ht_from_values, islanded_estimate, run_lips, HtEstimate, LipsConfig, LipsRun, ModelFit};
use crate::mc3::{mc3_run, Mc3Config, ModelPriorDensity};
use crate::model::ModelVector;
use crate::rng::stream;

/// Train/test split sizes and seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Disjoint random train and test row indices.
pub fn split_indices(n: usize, p: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if spec.n_train + spec.n_test > n {
        return Err(LipsError::Config(format!(
            "split of {} + {} rows exceeds the {n} available",
            spec.n_train, spec.n_test
        )));
    }
    if spec.n_train < p + 2 {
        log::warn!("training set of {} rows is small for {p} predictors", spec.n_train);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream(spec.seed, 3));
    let test = idx[spec.n_train..spec.n_train + spec.n_test].to_vec();
    idx.truncate(spec.n_train);
    Ok((idx, test))
}

fn fits<'a>(
    models: impl Iterator<Item = &'a ModelVector>,
    data: &RegressionData,
    coef: &CoefficientPrior,
) -> Result<HashMap<ModelVector, ModelFit>> {
    let mut unique: Vec<&ModelVector> = models.collect();
    unique.sort_by(|a, b| a.canonical_cmp(b));
    unique.dedup();
    let fitted: Vec<ModelFit> = unique
        .par_iter()
        .map(|m| ModelFit::new(data, coef, m))
        .collect::<Result<_>>()?;
    Ok(unique.into_iter().cloned().zip(fitted).collect())
}

/// Islanded BMA predictions at raw covariate rows.
pub fn lips_predictions(
    run: &LipsRun,
    data: &RegressionData,
    coef: &CoefficientPrior,
    rows: &[Vec<f64>],
) -> Result<Vec<HtEstimate>> {
    if let Some(r) = rows.iter().find(|r| r.len() != data.p()) {
        return Err(LipsError::Domain(format!(
            "new row has {} values, expected {}",
            r.len(),
            data.p()
        )));
    }
    let table = fits(run.samples().map(|s| &s.model), data, coef)?;
    let islands: Vec<(Vec<f64>, Vec<&ModelFit>)> = run
        .islands
        .iter()
        .map(|i| {
            (
                i.samples.iter().map(|s| s.log_weight).collect(),
                i.samples.iter().map(|s| &table[&s.model]).collect(),
            )
        })
        .collect();
    rows.par_iter()
        .map(|x| {
            let per_island = islands
                .iter()
                .map(|(logs, fs)| {
                    let values: Vec<f64> = fs.iter().map(|f| f.predict(x)).collect();
                    ht_from_values(logs, &values)
                })
                .collect::<Result<Vec<_>>>()?;
            islanded_estimate(&per_island)
        })
        .collect()
}

/// BMA predictions from the visit frequencies of an MC³ chain.
pub fn chain_predictions(
    chain: &[ModelVector],
    data: &RegressionData,
    coef: &CoefficientPrior,
    rows: &[Vec<f64>],
) -> Result<Vec<f64>> {
    if chain.is_empty() {
        return Err(LipsError::Domain("empty chain".into()));
    }
    let mut counts: HashMap<&ModelVector, usize> = HashMap::new();
    chain.iter().for_each(|m| *counts.entry(m).or_default() += 1);
    let table = fits(counts.keys().copied(), data, coef)?;
    let mut visited: Vec<(&ModelVector, usize)> = counts.into_iter().collect();
    visited.sort_by(|a, b| a.0.canonical_cmp(b.0));
    Ok(rows
        .iter()
        .map(|x| {
            visited.iter().map(|(m, c)| *c as f64 * table[*m].predict(x)).sum::<f64>() / chain.len() as f64
        })
        .collect())
}

/// Sampler settings for one comparison method.
#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    /// Training-set mean.
    Null,
    Lips { particles: usize, islands: usize, k: usize },
    Mc3 { iterations: usize, burnin: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Null => "null",
            Self::Lips { .. } => "lips",
            Self::Mc3 { .. } => "mc3",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareConfig {
    pub splits: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub prior: PriorSpec,
    pub coef: CoefSpec,
    pub max_size: Option<usize>,
    pub methods: Vec<Method>,
}

/// Test-set error of one method on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitOutcome {
    pub split: usize,
    pub method: &'static str,
    pub ase: f64,
}

fn split_seed(seed: u64, split: usize) -> u64 {
    seed ^ (split as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Fits each method on training rows and predicts the held-out rows.
pub fn evaluate_split(
    train: &Dataset,
    test: &Dataset,
    config: &CompareConfig,
    seed: u64,
) -> Result<Vec<(&'static str, f64)>> {
    let data = std::sync::Arc::new(train.regression_data()?);
    let prior = config.prior.build(&data, config.max_size)?;
    let coef = config.coef.build(data.n())?;
    let evidence = RegressionEvidence::new(data.clone(), coef);
    config
        .methods
        .iter()
        .map(|m| {
            let preds = match *m {
                Method::Null => vec![data.y_mean(); test.n()],
                Method::Lips { particles, islands, k } => {
                    let run = run_lips(&LipsConfig::new(particles, islands, k, seed), &prior, &evidence)?;
                    lips_predictions(&run, &data, &coef, &test.rows)?
                        .iter()
                        .map(|e| e.value)
                        .collect()
                }
                Method::Mc3 { iterations, burnin } => {
                    let density = ModelPriorDensity::from_prior(&prior)?;
                    let mut cfg = Mc3Config::new(iterations, burnin, seed);
                    cfg.keep_chain = true;
                    let res = mc3_run(&evidence, &density, &cfg)?;
                    chain_predictions(&res.chain, &data, &coef, &test.rows)?
                }
            };
            Ok((m.name(), ase(&preds, &test.y)?))
        })
        .collect()
}

/// Repeated random splits; outcomes ordered by split, then method.
pub fn compare(dataset: &Dataset, config: &CompareConfig) -> Result<Vec<SplitOutcome>> {
    if config.splits == 0 || config.methods.is_empty() {
        return Err(LipsError::Config("need at least one split and one method".into()));
    }
    let per_split: Vec<Vec<SplitOutcome>> = (0..config.splits)
        .into_par_iter()
        .map(|s| {
            let seed = split_seed(config.seed, s);
            let spec = SplitSpec {
                n_train: config.n_train,
                n_test: config.n_test,
                seed,
            };
            let (tr, te) = split_indices(dataset.n(), dataset.p(), &spec)?;
            let outcomes = evaluate_split(&dataset.subset(&tr)?, &dataset.subset(&te)?, config, seed)?;
            Ok(outcomes
                .into_iter()
                .map(|(method, ase)| SplitOutcome { split: s, method, ase })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_split.into_iter().flatten().collect())
}
