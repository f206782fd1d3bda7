use crate::error::{domain, Result};

/// Centered design and response with the cross products every model fit
/// needs: `G = XᵀX`, `Xᵀy` and the total sum of squares of `y`.
#[derive(Clone, Debug)]
pub struct RegressionData {
    n: usize,
    p: usize,
    /// Centered columns, column-major.
    x: Vec<f64>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
    /// Row-major `p × p`.
    gram: Vec<f64>,
    xty: Vec<f64>,
    ssy: f64,
}

impl RegressionData {
    /// From `n` rows of `p` predictors and the response.
    pub fn new(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return domain(format!("row {i} has {} values, expected {p}", rows[i].len()));
        }
        let columns = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::from_columns(columns, y.to_vec())
    }

    pub fn from_columns(columns: Vec<Vec<f64>>, mut y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        let p = columns.len();
        if n < 3 {
            return domain(format!("need at least 3 observations, got {n}"));
        }
        if let Some(j) = columns.iter().position(|c| c.len() != n) {
            return domain(format!("column {j} has {} values, expected {n}", columns[j].len()));
        }
        if columns.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return domain("data contain non-finite values");
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        y.iter_mut().for_each(|v| *v -= y_mean);
        let ssy: f64 = y.iter().map(|v| v * v).sum();
        if !(ssy > 0.0) {
            return domain("response has zero variance");
        }
        let mut x = Vec::with_capacity(n * p);
        let mut x_mean = Vec::with_capacity(p);
        for col in &columns {
            let m = col.iter().sum::<f64>() / n as f64;
            x_mean.push(m);
            x.extend(col.iter().map(|v| v - m));
        }
        let mut gram = vec![0.0; p * p];
        for i in 0..p {
            let ci = &x[i * n..(i + 1) * n];
            for j in 0..=i {
                let cj = &x[j * n..(j + 1) * n];
                let v: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
                gram[i * p + j] = v;
                gram[j * p + i] = v;
            }
        }
        let xty = (0..p)
            .map(|j| x[j * n..(j + 1) * n].iter().zip(&y).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Self {
            n,
            p,
            x,
            y,
            x_mean,
            y_mean,
            gram,
            xty,
            ssy,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Centered total sum of squares of `y`.
    pub fn ssy(&self) -> f64 {
        self.ssy
    }

    pub fn x_mean(&self) -> &[f64] {
        &self.x_mean
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    /// Centered column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    /// Centered response.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.p + j]
    }

    pub fn gram_row(&self, j: usize) -> &[f64] {
        &self.gram[j * self.p..(j + 1) * self.p]
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    /// Largest model size with a well-defined fit, `min(p, n - 2)`.
    pub fn default_max_size(&self) -> usize {
        self.p.min(self.n - 2)
    }

    /// Sample correlation matrix of the predictors (zero off-diagonal for
    /// constant columns).
    pub fn correlation(&self) -> Vec<Vec<f64>> {
        let p = self.p;
        let mut out = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in 0..p {
                let d = (self.gram(i, i) * self.gram(j, j)).sqrt();
                out[i][j] = if i == j {
                    1.0
                } else if d > 0.0 {
                    self.gram(i, j) / d
                } else {
                    0.0
                };
            }
        }
        out
    }
}
