//! Log-space arithmetic on probabilities.

use crate::{Error, Result};

/// `log(1 - exp(x))` for `x <= 0`.
///
/// Switches between `log(-expm1(x))` and `log1p(-exp(x))` at `-ln 2`, which
/// keeps full relative precision on both sides. `x = 0` gives `-inf`.
pub fn log1mexp(x: f64) -> Result<f64> {
    if x > 0.0 {
        return Err(Error::Domain(x));
    }
    Ok(log1mexp_unchecked(x))
}

#[inline]
pub(crate) fn log1mexp_unchecked(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `log(sum(exp(xs)))` with a max shift. Empty input or all `-inf` gives `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    if max.is_nan() {
        return f64::NAN;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
