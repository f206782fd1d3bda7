//! Model identifiers and the Markov kernel of the probabilistic forward-stepwise
//! (pFS) procedure.
//!
//! A model is a subset of the `p` candidate predictors. Predictors are indexed
//! from 0 inside the library; the textual form writes predictor 0 leftmost, so
//! `"0100"` is the model containing only the second predictor.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use smallvec::{smallvec, SmallVec};

use crate::error::{domain, LipsError, Result};
use crate::prior::PfsPrior;

/// Largest `p` for which exhaustive routines (enumeration, DP tables,
/// tabulated priors) will run.
pub const ENUMERATION_LIMIT: usize = 20;

const WORD: usize = 64;

/// A subset of the `p` predictors, packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ModelVector {
    words: SmallVec<[u64; 2]>,
    p: usize,
    size: usize,
}

impl ModelVector {
    /// The null model (no predictors).
    pub fn null(p: usize) -> Self {
        let n_words = p.div_ceil(WORD).max(1);
        Self {
            words: smallvec![0; n_words],
            p,
            size: 0,
        }
    }

    /// The full model (all predictors).
    pub fn full(p: usize) -> Self {
        let mut m = Self::null(p);
        for j in 0..p {
            m.insert(j);
        }
        m
    }

    pub fn from_indices(p: usize, indices: &[usize]) -> Result<Self> {
        let mut m = Self::null(p);
        for &j in indices {
            if j >= p {
                return domain(format!("predictor index {j} out of range for p = {p}"));
            }
            m.insert(j);
        }
        Ok(m)
    }

    /// Builds a model from a bitmask where bit `j` marks predictor `j`.
    /// Only meaningful for `p <= 64`.
    pub fn from_mask(p: usize, mask: usize) -> Self {
        debug_assert!(p <= WORD);
        let mask = mask as u64;
        Self {
            words: smallvec![mask],
            p,
            size: mask.count_ones() as usize,
        }
    }

    /// Inverse of [`ModelVector::from_mask`].
    pub fn to_mask(&self) -> usize {
        debug_assert!(self.p <= WORD);
        self.words[0] as usize
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of included predictors, `|γ|`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_null(&self) -> bool {
        self.size == 0
    }

    pub fn is_full(&self) -> bool {
        self.size == self.p
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        j < self.p && (self.words[j / WORD] >> (j % WORD)) & 1 == 1
    }

    fn insert(&mut self, j: usize) {
        let (w, b) = (j / WORD, j % WORD);
        if (self.words[w] >> b) & 1 == 0 {
            self.words[w] |= 1 << b;
            self.size += 1;
        }
    }

    /// `γ^{+j}`: the model with predictor `j` added. Adding a predictor that is
    /// already present returns the model unchanged.
    pub fn add_variable(&self, j: usize) -> Result<Self> {
        if j >= self.p {
            return domain(format!("predictor index {j} out of range for p = {}", self.p));
        }
        Ok(self.with(j))
    }

    /// Unchecked version of [`ModelVector::add_variable`] for hot loops.
    pub fn with(&self, j: usize) -> Self {
        let mut m = self.clone();
        m.insert(j);
        m
    }

    /// The model with predictor `j` removed.
    pub fn without(&self, j: usize) -> Self {
        let mut m = self.clone();
        let (w, b) = (j / WORD, j % WORD);
        if (m.words[w] >> b) & 1 == 1 {
            m.words[w] &= !(1 << b);
            m.size -= 1;
        }
        m
    }

    /// Included predictor indices in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(move |(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * WORD + b)
            })
        })
    }

    /// Excluded predictor indices in increasing order.
    pub fn zeros(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&j| !self.contains(j))
    }

    pub fn indices(&self) -> Vec<usize> {
        self.ones().collect()
    }

    /// True when `self` is `other` plus exactly one predictor; returns it.
    pub fn added_over(&self, other: &ModelVector) -> Option<usize> {
        if self.p != other.p || self.size != other.size + 1 {
            return None;
        }
        let mut added = None;
        for (w, (&a, &b)) in self.words.iter().zip(other.words.iter()).enumerate() {
            if b & !a != 0 {
                return None;
            }
            let diff = a & !b;
            if diff != 0 {
                added = Some(w * WORD + diff.trailing_zeros() as usize);
            }
        }
        added
    }

    /// Canonical order: by size, then lexicographically by the sorted list of
    /// included indices. For `p = 2` this gives `00, 10, 01, 11`.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.size
            .cmp(&other.size)
            .then_with(|| self.ones().cmp(other.ones()))
    }
}

impl fmt::Display for ModelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = (0..self.p)
            .map(|j| if self.contains(j) { '1' } else { '0' })
            .collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for ModelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelVector({self})")
    }
}

impl FromStr for ModelVector {
    type Err = LipsError;

    fn from_str(s: &str) -> Result<Self> {
        let p = s.len();
        let mut m = Self::null(p);
        for (j, c) in s.chars().enumerate() {
            match c {
                '1' => m.insert(j),
                '0' => {}
                other => return domain(format!("invalid model character {other:?}")),
            }
        }
        Ok(m)
    }
}

/// One step of the latent decision sequence: the stopping indicator `S_t` and,
/// when the procedure continues, the selected predictor `J_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PathStep {
    pub stop: bool,
    pub selected: Option<usize>,
}

impl PathStep {
    pub fn stopped() -> Self {
        Self {
            stop: true,
            selected: None,
        }
    }

    pub fn select(j: usize) -> Self {
        Self {
            stop: false,
            selected: Some(j),
        }
    }
}

/// Transition probability of the pFS chain at step `t` (1-based):
///
/// * 1 if the chain had already stopped (`|prev| < t-1`) and `next == prev`;
/// * `ρ(prev)` if `|prev| = t-1` and `next == prev`;
/// * `(1-ρ(prev)) λ_j(prev)` if `next = prev^{+j}` with `j ∉ prev`;
/// * 0 otherwise.
pub fn transition_probability(
    prior: &PfsPrior,
    prev: &ModelVector,
    next: &ModelVector,
    t: usize,
) -> Result<f64> {
    let p = prior.p();
    if prev.p() != p || next.p() != p {
        return domain("model dimension does not match the prior");
    }
    if t == 0 || t > p {
        return domain(format!("step index {t} outside 1..={p}"));
    }
    if prev.size() > t - 1 {
        return domain(format!(
            "model of size {} is unreachable after {} steps",
            prev.size(),
            t - 1
        ));
    }
    if prev.size() < t - 1 {
        return Ok(if next == prev { 1.0 } else { 0.0 });
    }
    if next == prev {
        return Ok(prior.rho(prev));
    }
    match next.added_over(prev) {
        Some(j) => {
            let rho = prior.rho(prev);
            if rho >= 1.0 {
                return Ok(0.0);
            }
            let lambda = prior.lambda(prev)?;
            Ok((1.0 - rho) * lambda[j])
        }
        None => Ok(0.0),
    }
}

/// Probability of a full tentative-model sequence `γ_(0), …, γ_(p)`.
///
/// The sequence must start at the null model and may only add one predictor
/// per step; anything else is a domain error. A path that keeps adding until
/// step `p` without a recorded stop ends with the terminal factor `ρ(γ_(p))`
/// (taken as 1 for the full model), matching the product written out for a
/// stopped chain.
pub fn path_probability(prior: &PfsPrior, path: &[ModelVector]) -> Result<f64> {
    let p = prior.p();
    if path.len() != p + 1 {
        return domain(format!("path must have {} models, got {}", p + 1, path.len()));
    }
    if !path[0].is_null() {
        return domain("path must start at the null model");
    }
    for (t, pair) in path.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        if next != prev && next.added_over(prev).is_none() {
            return domain(format!("invalid transition at step {}: {prev} -> {next}", t + 1));
        }
    }
    let mut prob = 1.0;
    for (t, pair) in path.windows(2).enumerate() {
        prob *= transition_probability(prior, &pair[0], &pair[1], t + 1)?;
        if prob == 0.0 {
            return Ok(0.0);
        }
    }
    // A chain that added a variable at every step never drew its final stop.
    let last = &path[p];
    if last.size() == p {
        prob *= prior.rho(last);
    }
    Ok(prob)
}

/// All `2^p` models in canonical (size, lexicographic) order.
pub fn enumerate_models(p: usize) -> Result<impl Iterator<Item = ModelVector>> {
    enumerate_models_with_limit(p, ENUMERATION_LIMIT)
}

pub fn enumerate_models_with_limit(
    p: usize,
    limit: usize,
) -> Result<impl Iterator<Item = ModelVector>> {
    if p > limit {
        return Err(LipsError::Capacity { p, limit });
    }
    Ok((0..=p).flat_map(move |s| {
        (0..p)
            .combinations(s)
            .map(move |idx| ModelVector::from_indices(p, &idx).expect("indices in range"))
    }))
}

/// Bitmasks of all `2^p` models in canonical order.
pub fn canonical_masks(p: usize) -> Result<Vec<usize>> {
    Ok(enumerate_models(p)?.map(|m| m.to_mask()).collect())
}

/// Checks `p` against the enumeration limit.
pub fn check_enumerable(p: usize) -> Result<()> {
    if p > ENUMERATION_LIMIT {
        Err(LipsError::Capacity {
            p,
            limit: ENUMERATION_LIMIT,
        })
    } else {
        Ok(())
    }
}
