use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bayes::{CoefficientPrior, RegressionData};
use crate::error::{LipsError, Result};
use crate::model::ModelVector;
use crate::prior::{
    beta_binomial_sizes, block_rule, conditional_selection, dilution_prior, pfs_from_distribution, size_prior_to_h,
    symmetric_pfs, truncate_sizes, ConditionalRule, PfsPrior, SelectionRule, WeightedSelection,
};

/// Base model-space prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorKind {
    BetaBinomial {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    /// Stopping from a size distribution via `h(s) = q_s / tail_s`.
    SizeVector { q: Vec<f64> },
    /// Symmetric prior with size distribution `q`.
    Symmetric { q: Vec<f64> },
    /// Equal mass on each size `0..=max_size`.
    UniformSize { max_size: usize },
    /// Uniform-size stopping with correlation-cluster selection.
    Dilution {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// Distribution over all models, one `model,probability` row each.
    Tabulated { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

fn default_threshold() -> f64 {
    0.9
}

/// Modifications applied on top of the base prior, in order. Indices are
/// 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Decorator {
    Weighted {
        #[serde(default)]
        weights: Option<Vec<f64>>,
        boosted: Vec<usize>,
        factor: f64,
    },
    Conditional {
        triggers: Vec<usize>,
        target: usize,
        factor: f64,
    },
    Interaction { parents: Vec<usize>, target: usize },
    Block { blocks: Vec<Vec<usize>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    #[serde(flatten)]
    pub kind: PriorKind,
    #[serde(default)]
    pub decorators: Vec<Decorator>,
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| LipsError::Config(format!("`{v}` is not a number")))
        })
        .collect()
}

impl PriorSpec {
    /// `beta-binomial[:a,b]`, `size-vector:q0,..`, `symmetric:q0,..`,
    /// `uniform-size:s`, `dilution[:threshold]` or `tabulated:path`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a)),
            None => (s.trim(), None),
        };
        let kind = match (kind, args) {
            ("beta-binomial", None) => PriorKind::BetaBinomial { a: 1.0, b: 1.0 },
            ("beta-binomial", Some(a)) => match numbers(a)?.as_slice() {
                [a, b] => PriorKind::BetaBinomial { a: *a, b: *b },
                _ => return Err(LipsError::Config("beta-binomial takes two parameters".into())),
            },
            ("size-vector", Some(a)) => PriorKind::SizeVector { q: numbers(a)? },
            ("symmetric", Some(a)) => PriorKind::Symmetric { q: numbers(a)? },
            ("uniform-size", Some(a)) => PriorKind::UniformSize {
                max_size: a
                    .trim()
                    .parse()
                    .map_err(|_| LipsError::Config(format!("`{a}` is not a model size")))?,
            },
            ("dilution", None) => PriorKind::Dilution { threshold: 0.9 },
            ("dilution", Some(a)) => PriorKind::Dilution {
                threshold: a
                    .trim()
                    .parse()
                    .map_err(|_| LipsError::Config(format!("`{a}` is not a threshold")))?,
            },
            ("tabulated", Some(a)) => PriorKind::Tabulated { path: a.into() },
            _ => return Err(LipsError::Config(format!("unrecognized prior `{s}`"))),
        };
        Ok(Self {
            kind,
            decorators: Vec::new(),
        })
    }

    /// Builds the prior for `data`, capping model size at `min(p, n − 2)` and
    /// at `max_size` when given.
    pub fn build(&self, data: &RegressionData, max_size: Option<usize>) -> Result<PfsPrior> {
        let p = data.p();
        let cap = max_size.unwrap_or(p).min(data.default_max_size());
        let check_len = |q: &[f64]| {
            if q.len() != p + 1 {
                Err(LipsError::Config(format!("size vector needs {} entries, got {}", p + 1, q.len())))
            } else {
                Ok(())
            }
        };
        let base = match &self.kind {
            PriorKind::BetaBinomial { a, b } => symmetric_pfs(&beta_binomial_sizes(p, *a, *b)?)?,
            PriorKind::SizeVector { q } => {
                check_len(q)?;
                let h = size_prior_to_h(q)?;
                PfsPrior::new(p, Arc::new(h), Arc::new(crate::prior::UniformSelection::new(p)))
                    .with_symmetric_sizes(q.clone())
            }
            PriorKind::Symmetric { q } => {
                check_len(q)?;
                symmetric_pfs(q)?
            }
            PriorKind::UniformSize { max_size } => {
                symmetric_pfs(&truncate_sizes(&vec![1.0 / (p + 1) as f64; p + 1], (*max_size).min(p))?)?
            }
            PriorKind::Dilution { threshold } => {
                let sizes = symmetric_pfs(&vec![1.0 / (p + 1) as f64; p + 1])?;
                let selection = dilution_prior(&data.correlation(), *threshold)?;
                PfsPrior::new(p, sizes.stopping().clone(), Arc::new(selection))
            }
            PriorKind::Tabulated { path } => tabulated_prior(path, p)?,
        };
        let mut prior = base;
        for d in &self.decorators {
            prior = decorate(prior, d)?;
        }
        Ok(prior.with_max_size(cap))
    }
}

fn decorate(prior: PfsPrior, d: &Decorator) -> Result<PfsPrior> {
    let p = prior.p();
    let with_selection =
        |sel: Arc<dyn SelectionRule>| PfsPrior::new(p, prior.stopping().clone(), sel);
    Ok(match d {
        Decorator::Weighted {
            weights,
            boosted,
            factor,
        } => {
            let w = weights.clone().unwrap_or_else(|| vec![1.0; p]);
            if w.len() != p {
                return Err(LipsError::Config(format!("weights need {p} entries")));
            }
            with_selection(Arc::new(WeightedSelection::new(w, boosted, *factor)?))
        }
        Decorator::Conditional {
            triggers,
            target,
            factor,
        } => with_selection(Arc::new(conditional_selection(
            prior.selection().clone(),
            p,
            vec![ConditionalRule::Boost {
                triggers: triggers.clone(),
                target: *target,
                factor: *factor,
            }],
        )?)),
        Decorator::Interaction { parents, target } => with_selection(Arc::new(conditional_selection(
            prior.selection().clone(),
            p,
            vec![ConditionalRule::Requires {
                parents: parents.clone(),
                target: *target,
            }],
        )?)),
        Decorator::Block { blocks } => block_rule(&prior, blocks.clone())?,
    })
}

/// Reads `model,probability` rows (model as a 0/1 string) into a pFS prior.
fn tabulated_prior(path: &std::path::Path, p: usize) -> Result<PfsPrior> {
    crate::model::check_enumerable(p)?;
    let mut pi = vec![0.0; 1 << p];
    let mut rdr = csv::Reader::from_path(path)?;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_err = |message: String| LipsError::Parse {
            row: r + 1,
            column: String::new(),
            message,
        };
        let model: ModelVector = rec
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e: LipsError| parse_err(e.to_string()))?;
        if model.p() != p {
            return Err(parse_err(format!("model has {} predictors, expected {p}", model.p())));
        }
        let prob: f64 = rec
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| parse_err("bad probability".into()))?;
        pi[model.to_mask()] = prob;
    }
    Ok(pfs_from_distribution(&pi)?.into_prior())
}

/// `g-prior` (unit information, `g = n`), `g-prior:<g>`, `hyper-g` (`a = 3`)
/// or `hyper-g:<a>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefSpec {
    GPrior {
        #[serde(default)]
        g: Option<f64>,
    },
    HyperG {
        #[serde(default = "default_a")]
        a: f64,
    },
}

fn default_a() -> f64 {
    3.0
}

impl CoefSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |a: &str| {
            a.parse::<f64>()
                .map_err(|_| LipsError::Config(format!("`{a}` is not a number")))
        };
        match (kind, arg) {
            ("g-prior" | "g", None) => Ok(Self::GPrior { g: None }),
            ("g-prior" | "g", Some(a)) => Ok(Self::GPrior { g: Some(num(a)?) }),
            ("hyper-g", None) => Ok(Self::HyperG { a: 3.0 }),
            ("hyper-g", Some(a)) => Ok(Self::HyperG { a: num(a)? }),
            _ => Err(LipsError::Config(format!("unrecognized coefficient prior `{s}`"))),
        }
    }

    pub fn build(&self, n: usize) -> Result<CoefficientPrior> {
        match self {
            Self::GPrior { g: None } => Ok(CoefficientPrior::unit_information(n)),
            Self::GPrior { g: Some(g) } => CoefficientPrior::g_prior(*g),
            Self::HyperG { a } => CoefficientPrior::hyper_g(*a),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::marginal_table;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, p: usize) -> RegressionData {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        RegressionData::new(&rows, &y).unwrap()
    }

    #[test]
    fn parses_specs() {
        assert_eq!(PriorSpec::parse("beta-binomial").unwrap().kind, PriorKind::BetaBinomial { a: 1.0, b: 1.0 });
        assert_eq!(PriorSpec::parse("beta-binomial:2,3").unwrap().kind, PriorKind::BetaBinomial { a: 2.0, b: 3.0 });
        assert_eq!(PriorSpec::parse("dilution").unwrap().kind, PriorKind::Dilution { threshold: 0.9 });
        assert_eq!(PriorSpec::parse("uniform-size:4").unwrap().kind, PriorKind::UniformSize { max_size: 4 });
        assert!(PriorSpec::parse("beta-binomial:1").is_err());
        assert!(PriorSpec::parse("nope").is_err());
        assert_eq!(CoefSpec::parse("hyper-g:4").unwrap(), CoefSpec::HyperG { a: 4.0 });
        assert_eq!(CoefSpec::parse("g-prior").unwrap().build(30).unwrap(), CoefficientPrior::G { g: 30.0 });
        assert!(CoefSpec::parse("hyper-g:1").unwrap().build(30).is_err());
    }

    #[test]
    fn toml_prior_with_decorators() {
        let text = r#"
            kind = "beta-binomial"
            a = 1.0
            b = 2.0
            [[decorators]]
            kind = "interaction"
            parents = [0, 1]
            target = 2
            [[decorators]]
            kind = "block"
            blocks = [[3, 4]]
        "#;
        let spec: PriorSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.decorators.len(), 2);
        let prior = spec.build(&data(20, 5), None).unwrap();
        let lam = prior.lambda(&ModelVector::from_indices(5, &[0]).unwrap()).unwrap();
        assert_eq!(lam[2], 0.0);
        assert_eq!(prior.rho(&ModelVector::from_indices(5, &[3]).unwrap()), 0.0);
    }

    #[test]
    fn size_cap_applies() {
        let d = data(6, 8);
        let prior = PriorSpec::parse("beta-binomial").unwrap().build(&d, None).unwrap();
        assert_eq!(prior.max_size(), 4);
        let prior = PriorSpec::parse("beta-binomial").unwrap().build(&d, Some(2)).unwrap();
        assert_eq!(prior.max_size(), 2);
        let table = marginal_table(&prior).unwrap();
        assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_size_truncates() {
        let prior = PriorSpec::parse("uniform-size:2").unwrap().build(&data(30, 6), None).unwrap();
        assert_eq!(prior.symmetric_sizes().unwrap(), &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 0.0, 0.0, 0.0][..]);
    }

    #[test]
    fn size_vector_equals_symmetric() {
        let q = "0.4,0.3,0.2,0.1";
        let d = data(20, 3);
        let a = marginal_table(&PriorSpec::parse(&format!("size-vector:{q}")).unwrap().build(&d, None).unwrap()).unwrap();
        let b = marginal_table(&PriorSpec::parse(&format!("symmetric:{q}")).unwrap().build(&d, None).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn tabulated_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pi.csv");
        std::fs::write(&path, "model,prob\n000,0.1\n100,0.2\n011,0.3\n111,0.4\n").unwrap();
        let spec = PriorSpec::parse(&format!("tabulated:{}", path.display())).unwrap();
        let prior = spec.build(&data(20, 3), None).unwrap();
        let t = marginal_table(&prior).unwrap();
        assert!((t[0b001] - 0.2).abs() < 1e-12);
        assert!((t[0b110] - 0.3).abs() < 1e-12);
        assert!((t[0b111] - 0.4).abs() < 1e-12);
    }
}
