//! Tanh-sinh (double-exponential) quadrature in log space.

use std::f64::consts::{FRAC_PI_2, PI};

/// Nodes beyond this sit within ~1e-275 of an endpoint, close enough for
/// singularities as strong as `(1-t)^{-0.999}`.
const U_MAX: f64 = 6.0;
const MAX_LEVELS: usize = 12;
const MIN_LEVELS: usize = 4;

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Running log-sum-exp.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    pub(crate) fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    pub(crate) fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY || x.is_nan() {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `ln ∫_lo^hi exp(f(t, 1-t)) dt` for `0 <= lo < hi <= 1`.
///
/// The integrand receives `t` and `1 - t` separately, each accurate near its
/// own endpoint, so factors like `(1-t)^β` keep full precision close to 1.
/// Integrable endpoint singularities are fine; interior peaks should be
/// placed at an endpoint by splitting the range.
pub(crate) fn log_integrate_unit<F>(f: F, lo: f64, hi: f64) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let width = hi - lo;
    let hi_gap = 1.0 - hi;
    let log_scale = width.ln() + (PI / 4.0).ln();
    let node = |u: f64| -> f64 {
        let v = FRAC_PI_2 * u.sinh();
        let d_lo = width / (1.0 + (-2.0 * v).exp());
        let d_hi = width / (1.0 + (2.0 * v).exp());
        if d_lo <= 0.0 || d_hi <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let value = f(lo + d_lo, hi_gap + d_hi);
        log_scale + ln_cosh(u) - 2.0 * ln_cosh(v) + value
    };

    let mut h = 1.0;
    let mut sum = LogSum::new();
    let n0 = (U_MAX / h) as i64;
    for k in -n0..=n0 {
        sum.add(node(k as f64 * h));
    }
    let mut estimate = sum.value() + h.ln();
    for level in 1..MAX_LEVELS {
        h /= 2.0;
        let n = (U_MAX / h) as i64;
        // New nodes are the odd multiples of the halved step.
        let mut k = -n + if n % 2 == 0 { 1 } else { 0 };
        while k <= n {
            sum.add(node(k as f64 * h));
            k += 2;
        }
        let next = sum.value() + h.ln();
        let change = (next - estimate).abs();
        estimate = next;
        if level >= MIN_LEVELS && change < 1e-14 {
            break;
        }
    }
    estimate
}
