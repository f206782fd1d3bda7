use super::RegressionData;
use crate::error::{domain, LipsError, Result};
use crate::model::ModelVector;

/// Floor on the squared pivot relative to the squared column norm. Exact
/// duplicates leave a pivot of rounding size, ~1e-16 relative.
const PIVOT_FLOOR: f64 = 1e-10;

/// Least-squares summary of one model, grown a column at a time.
///
/// With `L` the Cholesky factor of `X_γᵀX_γ` (columns in insertion order)
/// the state keeps `z = L⁻¹X_γᵀy`, so `R² = |z|²/ssy`, and the `s × p`
/// block `W = L⁻¹ X_γᵀX`, from which any extension's pivot and new `z` entry
/// follow in `O(s)`.
#[derive(Clone, Debug)]
pub struct RegressionState {
    model: ModelVector,
    order: Vec<usize>,
    /// Packed lower triangle, row by row.
    factor: Vec<f64>,
    z: Vec<f64>,
    /// Row-major `s × p`.
    cross: Vec<f64>,
    /// Column sums `Σ_q W_qj²` and `Σ_q W_qj z_q`.
    col_norm2: Vec<f64>,
    col_dot: Vec<f64>,
    /// `|z|²`, accumulated in insertion order.
    fit: f64,
    r2: f64,
}

impl RegressionState {
    pub fn null(data: &RegressionData) -> Self {
        Self {
            model: ModelVector::null(data.p()),
            order: Vec::new(),
            factor: Vec::new(),
            z: Vec::new(),
            cross: Vec::new(),
            col_norm2: vec![0.0; data.p()],
            col_dot: vec![0.0; data.p()],
            fit: 0.0,
            r2: 0.0,
        }
    }

    /// Builds the state for `model` by extending in increasing index order.
    pub fn for_model(data: &RegressionData, model: &ModelVector) -> Result<Self> {
        if model.p() != data.p() {
            return domain("model dimension does not match the data");
        }
        let mut state = Self::null(data);
        for j in model.ones() {
            state = state.extend(data, j)?;
        }
        Ok(state)
    }

    pub fn model(&self) -> &ModelVector {
        &self.model
    }

    pub fn size(&self) -> usize {
        self.order.len()
    }

    /// Predictors in the order they entered.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn rss(&self, data: &RegressionData) -> f64 {
        data.ssy() * (1.0 - self.r2)
    }

    /// Dimension of the triangular factor.
    pub fn factor_dim(&self) -> usize {
        self.order.len()
    }

    fn pivot(&self, data: &RegressionData, j: usize) -> (f64, f64) {
        (data.gram(j, j) - self.col_norm2[j], data.xty()[j] - self.col_dot[j])
    }

    fn is_collinear(d2: f64, gjj: f64) -> bool {
        !(d2 > PIVOT_FLOOR * gjj) || gjj <= 0.0
    }

    /// Pivot `d` and new `z` entry for appending `j`.
    fn check_extension(&self, data: &RegressionData, j: usize) -> Result<(f64, f64)> {
        let p = data.p();
        if j >= p {
            return domain(format!("predictor index {j} out of range for p = {p}"));
        }
        if self.model.contains(j) {
            return domain(format!("predictor {j} is already in the model"));
        }
        let (d2, num) = self.pivot(data, j);
        if Self::is_collinear(d2, data.gram(j, j)) {
            return Err(LipsError::Collinear { index: j });
        }
        let d = d2.sqrt();
        Ok((d, num / d))
    }

    /// Row `j` of `W` after appending `j` with pivot `d`, written to `out`.
    fn new_row(&self, data: &RegressionData, j: usize, d: f64, out: &mut Vec<f64>) {
        let p = data.p();
        out.clear();
        out.extend_from_slice(data.gram_row(j));
        for q in 0..self.size() {
            let l = self.cross[q * p + j];
            if l != 0.0 {
                let wq = &self.cross[q * p..(q + 1) * p];
                out.iter_mut().zip(wq).for_each(|(r, w)| *r -= l * w);
            }
        }
        out.iter_mut().for_each(|r| *r /= d);
    }

    /// The state with predictor `j` appended. `self` is left untouched.
    pub fn extend(&self, data: &RegressionData, j: usize) -> Result<Self> {
        let (d, zj) = self.check_extension(data, j)?;
        let p = data.p();
        let s = self.size();
        let mut row = Vec::with_capacity(p);
        self.new_row(data, j, d, &mut row);
        let mut factor = Vec::with_capacity(self.factor.len() + s + 1);
        factor.extend_from_slice(&self.factor);
        factor.extend((0..s).map(|q| self.cross[q * p + j]));
        factor.push(d);
        let mut z = Vec::with_capacity(s + 1);
        z.extend_from_slice(&self.z);
        z.push(zj);
        let col_norm2 = self.col_norm2.iter().zip(&row).map(|(a, w)| a + w * w).collect();
        let col_dot = self.col_dot.iter().zip(&row).map(|(a, w)| a + w * zj).collect();
        let mut cross = Vec::with_capacity(self.cross.len() + p);
        cross.extend_from_slice(&self.cross);
        cross.extend_from_slice(&row);
        let mut order = Vec::with_capacity(s + 1);
        order.extend_from_slice(&self.order);
        order.push(j);
        let fit = self.fit + zj * zj;
        Ok(Self {
            model: self.model.with(j),
            order,
            factor,
            z,
            cross,
            col_norm2,
            col_dot,
            fit,
            r2: (fit / data.ssy()).clamp(0.0, 1.0),
        })
    }

    fn child_r2(&self, data: &RegressionData, j: usize, norm2: f64, dot: f64, r2: f64) -> Option<f64> {
        let gjj = data.gram(j, j);
        let d2 = gjj - norm2;
        if Self::is_collinear(d2, gjj) {
            None
        } else {
            let num = data.xty()[j] - dot;
            Some((r2 + num * num / (d2 * data.ssy())).clamp(0.0, 1.0))
        }
    }

    /// `R²` of every one-predictor extension, in `O(p)`. Entries for
    /// included or collinear predictors are `None`.
    pub fn children_r2(&self, data: &RegressionData, out: &mut [Option<f64>]) {
        for (j, slot) in out.iter_mut().enumerate().take(data.p()) {
            *slot = if self.model.contains(j) {
                None
            } else {
                self.child_r2(data, j, self.col_norm2[j], self.col_dot[j], self.r2)
            };
        }
    }

    /// `R²` of `γ+j` and, through `out`, of every `γ+j+l`, without building
    /// the state of `γ+j`. Matches `extend(j)` followed by `children_r2`
    /// bit for bit. `row` is scratch space.
    pub fn extension_children_r2(
        &self,
        data: &RegressionData,
        j: usize,
        row: &mut Vec<f64>,
        out: &mut [Option<f64>],
    ) -> Result<f64> {
        let (d, zj) = self.check_extension(data, j)?;
        self.new_row(data, j, d, row);
        let fit = self.fit + zj * zj;
        let r2 = (fit / data.ssy()).clamp(0.0, 1.0);
        for (l, slot) in out.iter_mut().enumerate().take(data.p()) {
            *slot = if l == j || self.model.contains(l) {
                None
            } else {
                let w = row[l];
                self.child_r2(data, l, self.col_norm2[l] + w * w, self.col_dot[l] + w * zj, r2)
            };
        }
        Ok(r2)
    }

    /// Least-squares coefficients `(predictor, β̂)` on the centered data.
    pub fn coefficients(&self) -> Vec<(usize, f64)> {
        let s = self.size();
        let at = |i: usize, k: usize| self.factor[i * (i + 1) / 2 + k];
        // Back substitution on Lᵀβ = z.
        let mut beta = self.z.clone();
        for i in (0..s).rev() {
            let mut v = beta[i];
            for k in (i + 1)..s {
                v -= at(k, i) * beta[k];
            }
            beta[i] = v / at(i, i);
        }
        self.order.iter().copied().zip(beta).collect()
    }
}

/// Value-semantics extension: the returned state includes `j`.
pub fn extend_state(
    state: &RegressionState,
    j: usize,
    data: &RegressionData,
) -> Result<RegressionState> {
    state.extend(data, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, n: usize, p: usize) -> RegressionData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| v * (j as f64 - 1.5)).sum::<f64>() + rng.random::<f64>())
            .collect();
        RegressionData::new(&rows, &y).unwrap()
    }

    /// R² and coefficients by a dense QR solve.
    fn batch_fit(data: &RegressionData, cols: &[usize]) -> (f64, Vec<f64>) {
        let n = data.n();
        let x = DMatrix::from_fn(n, cols.len(), |i, k| data.column(cols[k])[i]);
        let y = DVector::from_column_slice(data.y());
        let beta = x.clone().svd(true, true).solve(&y, 1e-14).unwrap();
        let resid = &y - &x * &beta;
        (1.0 - resid.norm_squared() / data.ssy(), beta.iter().copied().collect())
    }

    #[test]
    fn simple_regression_r2() {
        let data = random_data(1, 40, 3);
        let state = RegressionState::null(&data).extend(&data, 1).unwrap();
        let x = data.column(1);
        let sxy: f64 = x.iter().zip(data.y()).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let corr2 = sxy * sxy / (sxx * data.ssy());
        assert!((state.r2() - corr2).abs() < 1e-14);
    }

    #[test]
    fn duplicate_column_is_collinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let v = rng.random::<f64>();
                vec![v, rng.random::<f64>(), v]
            })
            .collect();
        let y: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let data = RegressionData::new(&rows, &y).unwrap();
        let s = RegressionState::null(&data).extend(&data, 0).unwrap();
        assert!(matches!(s.extend(&data, 2), Err(LipsError::Collinear { index: 2 })));
        let mut out = vec![None; 3];
        s.children_r2(&data, &mut out);
        assert!(out[0].is_none() && out[2].is_none() && out[1].is_some());
    }

    #[test]
    fn constant_column_is_collinear() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![4.0, 5.0], vec![3.0, 5.0]];
        let data = RegressionData::new(&rows, &[1.0, 0.0, 3.0, 2.0]).unwrap();
        let null = RegressionState::null(&data);
        assert!(matches!(null.extend(&data, 1), Err(LipsError::Collinear { index: 1 })));
    }

    #[test]
    fn three_steps_match_batch() {
        let data = random_data(3, 50, 6);
        let mut state = RegressionState::null(&data);
        let mut cols = Vec::new();
        for j in [4, 0, 2] {
            let before = state.clone();
            state = extend_state(&state, j, &data).unwrap();
            assert_eq!(before.size(), cols.len());
            cols.push(j);
            let (r2, beta) = batch_fit(&data, &cols);
            assert!((state.r2() - r2).abs() < 1e-8);
            assert!((state.rss(&data) - data.ssy() * (1.0 - r2)).abs() < 1e-8);
            for ((idx, b), (want_idx, want)) in state.coefficients().iter().zip(cols.iter().zip(&beta)) {
                assert_eq!(idx, want_idx);
                assert!((b - want).abs() < 1e-9);
            }
        }
        assert_eq!(state.factor_dim(), 3);
        assert_eq!(state.model().indices(), vec![0, 2, 4]);
    }

    #[test]
    fn children_match_extensions() {
        let data = random_data(4, 30, 8);
        let state = RegressionState::for_model(&data, &ModelVector::from_indices(8, &[1, 5]).unwrap()).unwrap();
        let mut out = vec![None; 8];
        state.children_r2(&data, &mut out);
        for j in 0..8 {
            match state.extend(&data, j) {
                Ok(child) => assert!((child.r2() - out[j].unwrap()).abs() < 1e-12),
                Err(_) => assert!(out[j].is_none()),
            }
        }
    }

    #[test]
    fn virtual_extension_is_bitwise_exact() {
        let data = random_data(5, 30, 9);
        let state = RegressionState::for_model(&data, &ModelVector::from_indices(9, &[2, 7]).unwrap()).unwrap();
        let (mut row, mut got, mut want) = (Vec::new(), vec![None; 9], vec![None; 9]);
        for j in 0..9 {
            match state.extend(&data, j) {
                Ok(child) => {
                    let r2 = state.extension_children_r2(&data, j, &mut row, &mut got).unwrap();
                    child.children_r2(&data, &mut want);
                    assert_eq!(r2.to_bits(), child.r2().to_bits());
                    assert_eq!(got, want);
                }
                Err(_) => assert!(state.extension_children_r2(&data, j, &mut row, &mut got).is_err()),
            }
        }
    }

    proptest! {
        #[test]
        fn r2_never_decreases(seed in 0u64..1000, order in Just(vec![3usize, 1, 6, 0, 2])) {
            let data = random_data(seed, 25, 7);
            let mut state = RegressionState::null(&data);
            for j in order {
                let next = state.extend(&data, j).unwrap();
                prop_assert!(next.r2() >= state.r2() - 1e-12);
                prop_assert!(next.r2() < 1.0);
                state = next;
            }
        }

        #[test]
        fn scale_invariant_r2(seed in 0u64..1000, k in 0.001f64..1000.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..15).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
            let y: Vec<f64> = (0..15).map(|_| rng.random::<f64>()).collect();
            let ky: Vec<f64> = y.iter().map(|v| v * k).collect();
            let a = RegressionData::new(&rows, &y).unwrap();
            let b = RegressionData::new(&rows, &ky).unwrap();
            let m = ModelVector::from_indices(4, &[0, 2, 3]).unwrap();
            let ra = RegressionState::for_model(&a, &m).unwrap().r2();
            let rb = RegressionState::for_model(&b, &m).unwrap().r2();
            prop_assert!((ra - rb).abs() < 1e-10);
        }
    }
}
