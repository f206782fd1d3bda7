use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::Dataset;
use crate::error::{domain, LipsError, Result};
use crate::rng::stream;

/// Half-width of the correlation band.
pub const BAND: usize = 20;

/// `corr(X_i, X_j) = (1 − 0.05|i−j|)·1{|i−j| ≤ 20}`.
pub fn banded_correlation(i: usize, j: usize) -> f64 {
    let d = i.abs_diff(j);
    if d <= BAND {
        1.0 - 0.05 * d as f64
    } else {
        0.0
    }
}

/// Lower Cholesky factor of the banded correlation matrix, stored by row
/// with row `i` covering columns `i−BAND..=i`.
struct BandFactor {
    p: usize,
    rows: Vec<Vec<f64>>,
}

impl BandFactor {
    fn new(p: usize) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(p);
        for i in 0..p {
            let lo = i.saturating_sub(BAND);
            let mut row = vec![0.0; i - lo + 1];
            for j in lo..=i {
                let mut v = banded_correlation(i, j);
                // Both rows are nonzero only from column `lo` on, since j <= i.
                for k in lo..j {
                    let ljk = if j == i { row[k - lo] } else { rows[j][k - j.saturating_sub(BAND)] };
                    v -= row[k - lo] * ljk;
                }
                if j == i {
                    if !(v > 0.0) {
                        return Err(LipsError::Numeric(format!(
                            "banded correlation matrix is not positive definite at p = {p}"
                        )));
                    }
                    row[j - lo] = v.sqrt();
                } else {
                    row[j - lo] = v / rows[j][j - j.saturating_sub(BAND)];
                }
            }
            rows.push(row);
        }
        Ok(Self { p, rows })
    }

    fn apply(&self, z: &[f64], out: &mut [f64]) {
        for i in 0..self.p {
            let lo = i.saturating_sub(BAND);
            out[i] = self.rows[i].iter().zip(&z[lo..=i]).map(|(l, v)| l * v).sum();
        }
    }
}

/// `n` draws from the zero-mean, unit-variance normal with banded correlation.
pub fn simulate_design(n: usize, p: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if p == 0 {
        return domain("design needs at least one predictor");
    }
    let factor = BandFactor::new(p)?;
    let mut rng = stream(seed, 1);
    let mut z = vec![0.0; p];
    Ok((0..n)
        .map(|_| {
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let mut x = vec![0.0; p];
            factor.apply(&z, &mut x);
            x
        })
        .collect())
}

/// Linear response `intercept + Σ β_j X_j + ε`, `ε ~ N(0, sigma²)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ResponseVariant {
    /// Predictors 2, 30, 58, 75, 97 (1-based) with alternating ±3.
    Ex3,
    /// Predictors 120, 280, 400, 560, 807 (1-based) with alternating ±3.
    Ex4,
    /// 0-based indices.
    Custom {
        intercept: f64,
        terms: Vec<(usize, f64)>,
        sigma: f64,
    },
}

fn alternating(one_based: &[usize]) -> Vec<(usize, f64)> {
    one_based
        .iter()
        .enumerate()
        .map(|(k, &j)| (j - 1, if k % 2 == 0 { 3.0 } else { -3.0 }))
        .collect()
}

impl ResponseVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ex3" => Ok(Self::Ex3),
            "ex4" => Ok(Self::Ex4),
            _ => Self::parse_custom(s)
                .ok_or_else(|| LipsError::Config(format!("unknown response variant `{s}`"))),
        }
    }

    /// `custom:<intercept>:<sigma>:<j>=<beta>,...` with 0-based `j`.
    fn parse_custom(s: &str) -> Option<Self> {
        let mut parts = s.strip_prefix("custom:")?.splitn(3, ':');
        let intercept = parts.next()?.trim().parse().ok()?;
        let sigma: f64 = parts.next()?.trim().parse().ok()?;
        let terms = parts
            .next()?
            .split(',')
            .map(|t| {
                let (j, b) = t.split_once('=')?;
                Some((j.trim().parse().ok()?, b.trim().parse().ok()?))
            })
            .collect::<Option<Vec<(usize, f64)>>>()?;
        (sigma >= 0.0).then_some(Self::Custom { intercept, terms, sigma })
    }

    pub fn intercept(&self) -> f64 {
        match self {
            Self::Custom { intercept, .. } => *intercept,
            _ => 10.0,
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            Self::Custom { sigma, .. } => *sigma,
            _ => 10.0,
        }
    }

    /// `(0-based index, coefficient)` pairs.
    pub fn terms(&self) -> Vec<(usize, f64)> {
        match self {
            Self::Ex3 => alternating(&[2, 30, 58, 75, 97]),
            Self::Ex4 => alternating(&[120, 280, 400, 560, 807]),
            Self::Custom { terms, .. } => terms.clone(),
        }
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.intercept() + self.terms().iter().map(|&(j, b)| b * x[j]).sum::<f64>()
    }

    /// `Var(Σ β_j X_j)` under the banded correlation.
    pub fn signal_variance(&self) -> f64 {
        let t = self.terms();
        t.iter()
            .flat_map(|&(i, a)| t.iter().map(move |&(j, b)| a * b * banded_correlation(i, j)))
            .sum()
    }
}

/// Responses for the rows of `x`; `noise_sd` overrides the variant's.
pub fn simulate_response(x: &[Vec<f64>], variant: &ResponseVariant, seed: u64, noise_sd: Option<f64>) -> Result<Vec<f64>> {
    let need = variant.terms().iter().map(|&(j, _)| j + 1).max().unwrap_or(0);
    if let Some(i) = x.iter().position(|r| r.len() < need) {
        return domain(format!("row {i} has {} predictors; the response needs {need}", x[i].len()));
    }
    let sigma = noise_sd.unwrap_or(variant.sigma());
    let mut rng = stream(seed, 2);
    Ok(x
        .iter()
        .map(|r| {
            let e: f64 = rng.sample(StandardNormal);
            variant.mean(r) + sigma * e
        })
        .collect())
}

/// Design plus response, with columns `x1..xp` and `y`.
pub fn simulate_dataset(n: usize, p: usize, variant: &ResponseVariant, seed: u64) -> Result<Dataset> {
    let x = simulate_design(n, p, seed)?;
    let y = simulate_response(&x, variant, seed, None)?;
    log::info!(
        "simulated n = {n}, p = {p}: signal variance {:.3}, noise variance {:.3}",
        variant.signal_variance(),
        variant.sigma().powi(2)
    );
    Dataset::new((1..=p).map(|j| format!("x{j}")).collect(), "y".into(), x, y)
}

/// Average squared error.
pub fn ase(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() || predictions.is_empty() {
        return domain("predictions and truths must have the same nonzero length");
    }
    Ok(predictions.iter().zip(truths).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_correlation() {
        let p = 45;
        let f = BandFactor::new(p).unwrap();
        for i in 0..p {
            for j in 0..=i {
                let mut v = 0.0;
                for k in i.saturating_sub(BAND)..=j {
                    if k + BAND >= j {
                        v += f.rows[i][k - i.saturating_sub(BAND)] * f.rows[j][k - j.saturating_sub(BAND)];
                    }
                }
                assert!((v - banded_correlation(i, j)).abs() < 1e-12, "{i} {j}");
            }
        }
        assert!(BandFactor::new(1000).is_ok());
    }

    #[test]
    fn sample_correlation_converges() {
        let (n, p) = (100_000, 30);
        let x = simulate_design(n, p, 3).unwrap();
        for i in 0..p {
            for j in 0..=i {
                let c: f64 = x.iter().map(|r| r[i] * r[j]).sum::<f64>() / n as f64;
                assert!((c - banded_correlation(i, j)).abs() < 0.02, "{i} {j} {c}");
            }
        }
        assert_eq!(banded_correlation(0, 20), 0.0);
        assert!((banded_correlation(4, 5) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn single_column_is_standard_normal() {
        let x = simulate_design(50_000, 1, 4).unwrap();
        let m = x.iter().map(|r| r[0]).sum::<f64>() / 50_000.0;
        let v = x.iter().map(|r| (r[0] - m).powi(2)).sum::<f64>() / 50_000.0;
        assert!(m.abs() < 0.02 && (v - 1.0).abs() < 0.03);
    }

    #[test]
    fn noiseless_response_is_linear() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| (0..100).map(|j| if j == 29 { i as f64 } else { 1.0 }).collect()).collect();
        let y = simulate_response(&x, &ResponseVariant::Ex3, 1, Some(0.0)).unwrap();
        for (i, v) in y.iter().enumerate() {
            // 10 + 3 + 3 + 3 − 3·i − 3
            assert!((v - (16.0 - 3.0 * i as f64)).abs() < 1e-12);
        }
        let terms = ResponseVariant::Ex3.terms();
        assert_eq!(terms, vec![(1, 3.0), (29, -3.0), (57, 3.0), (74, -3.0), (96, 3.0)]);
        assert!(simulate_response(&[vec![0.0; 50]], &ResponseVariant::Ex3, 1, None).is_err());
    }

    #[test]
    fn oracle_ase_is_noise_variance() {
        let d = simulate_dataset(20_000, 100, &ResponseVariant::Ex3, 5).unwrap();
        let truth: Vec<f64> = d.rows.iter().map(|r| ResponseVariant::Ex3.mean(r)).collect();
        let e = ase(&truth, &d.y).unwrap();
        assert!((e - 100.0).abs() < 4.0 * 100.0 * (2.0f64 / 20_000.0).sqrt(), "{e}");
        assert!(ResponseVariant::Ex3.signal_variance() > 0.0);
    }

    #[test]
    fn ase_basics() {
        assert_eq!(ase(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((ase(&[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!(ase(&[], &[]).is_err());
    }

    #[test]
    fn same_seed_same_data() {
        let a = simulate_dataset(20, 25, &ResponseVariant::Custom { intercept: 0.0, terms: vec![(3, 1.0)], sigma: 1.0 }, 9).unwrap();
        let b = simulate_dataset(20, 25, &ResponseVariant::Custom { intercept: 0.0, terms: vec![(3, 1.0)], sigma: 1.0 }, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn custom_variant_parses() {
        let v = ResponseVariant::parse("custom:1.5:2:0=3,4=-1").unwrap();
        assert_eq!(
            v,
            ResponseVariant::Custom {
                intercept: 1.5,
                terms: vec![(0, 3.0), (4, -1.0)],
                sigma: 2.0
            }
        );
        assert!(ResponseVariant::parse("custom:1:2:x=1").is_err());
        assert!(ResponseVariant::parse("ex5").is_err());
    }
}
