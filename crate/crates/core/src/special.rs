//! Log-domain special functions used by the likelihood.
//!
//! Every beta-function ratio in the model reduces to rising factorials
//! `x (x+1) ... (x+d-1)` with integer `d`, so the central routine here is
//! [`ln_rising`], evaluated from `ln x` so that `x = r * p` stays exact when
//! `r` is astronomically large or small.

use libm::{exp, log, log1p};

/// Terms summed directly before switching to the Stirling difference.
const DIRECT_TERMS: u64 = 32;
/// Smallest argument at which the truncated Stirling series is used.
const STIRLING_MIN: f64 = 32.0;

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + log1p(exp(-z))
    } else {
        log1p(exp(z))
    }
}

/// Logistic function `e^z / (1 + e^z)` using the branch that never overflows.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

/// `ln logistic(z)`.
#[inline]
pub fn ln_logistic(z: f64) -> f64 {
    -softplus(-z)
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// Log-sum-exp over a slice; `-inf` for an empty slice.
pub fn ln_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| exp(v - max)).sum();
    max + log(sum)
}

/// `ln(x + i)` given `ln x`, for a non-negative integer `i`.
#[inline]
pub fn ln_shift(ln_x: f64, i: u64) -> f64 {
    if i == 0 {
        return ln_x;
    }
    let ln_i = log(i as f64);
    if ln_x >= ln_i {
        ln_x + log1p(exp(ln_i - ln_x))
    } else {
        ln_i + log1p(exp(ln_x - ln_i))
    }
}

fn stirling_correction(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// `ln Γ(x + d) − ln Γ(x)` for `x ≥ 32`, free of the cancellation that the
/// naive difference of two log-gamma values suffers when `x ≫ d`.
fn ln_gamma_ratio_stirling(ln_x: f64, d: f64) -> f64 {
    let x = exp(ln_x);
    let rel = d / x;
    let l1p = log1p(rel);
    let ln_xd = ln_x + l1p;
    (x - 0.5) * l1p + d * ln_xd - d + (stirling_correction(x + d) - stirling_correction(x))
}

/// `ln ∏_{i=lo}^{hi-1} (x + i)` for moderate `x`, multiplying in blocks
/// and taking one logarithm per block.
fn ln_product_shifted(x: f64, lo: u64, hi: u64) -> f64 {
    const BLOCK_LIMIT: f64 = 1e280;
    let mut acc = 0.0;
    let mut prod = 1.0;
    for i in lo..hi {
        let t = x + i as f64;
        if prod > BLOCK_LIMIT / t {
            acc += log(prod);
            prod = 1.0;
        }
        prod *= t;
    }
    acc + log(prod)
}

/// `ln[x (x+1) ... (x+d-1)] = ln Γ(x+d) − ln Γ(x)`, from `ln x`.
///
/// Exact products for short runs, the Stirling-series difference
/// otherwise. Accurate to a few ulps of the result for any `x > 0`,
/// including `x` far below `f64::MIN_POSITIVE` when given through `ln_x`.
pub fn ln_rising(ln_x: f64, d: u64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    if ln_x >= log(STIRLING_MIN) && (d > DIRECT_TERMS || ln_x > 600.0) {
        return ln_gamma_ratio_stirling(ln_x, d as f64);
    }
    // The leading factor is taken from `ln x` so tiny `x` keeps full precision.
    let x = exp(ln_x);
    let peel = if d <= DIRECT_TERMS {
        d
    } else {
        // Smallest shift with x + shift ≥ STIRLING_MIN.
        (libm::ceil(STIRLING_MIN - x).max(1.0) as u64).min(d)
    };
    let head = ln_x + if peel > 1 { ln_product_shifted(x, 1, peel) } else { 0.0 };
    if peel == d {
        return head;
    }
    head + ln_gamma_ratio_stirling(log(x + peel as f64), (d - peel) as f64)
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    ln_rising(0.0, n)
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn naive_rising(x: f64, d: u64) -> f64 {
        (0..d).map(|i| (x + i as f64).ln()).sum()
    }

    #[test]
    fn rising_matches_naive_sum() {
        for &x in &[1e-9f64, 0.3, 1.0, 7.5, 31.9, 32.0, 100.0, 1e4, 1e9] {
            for &d in &[1u64, 2, 5, 31, 32, 33, 50, 120, 400] {
                let got = ln_rising(x.ln(), d);
                let want = naive_rising(x, d);
                assert_relative_eq!(got, want, epsilon = 1e-11, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn rising_matches_lgamma_difference_moderate_x() {
        for &x in &[2.5, 40.0, 333.3] {
            for &d in &[40u64, 105] {
                let want = ln_gamma(x + d as f64) - ln_gamma(x);
                assert_relative_eq!(ln_rising(x.ln(), d), want, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn rising_huge_argument_is_d_ln_x() {
        let ln_x = 400.0;
        let got = ln_rising(ln_x, 100);
        assert_relative_eq!(got, 100.0 * ln_x, max_relative = 1e-15);
    }

    #[test]
    fn rising_tiny_argument_keeps_leading_log() {
        // x = e^-500: product ≈ x · (d-1)!
        let got = ln_rising(-500.0, 60);
        let want = -500.0 + ln_factorial(59);
        assert_relative_eq!(got, want, max_relative = 1e-14);
    }

    #[test]
    fn factorial_and_binomial() {
        assert_relative_eq!(ln_factorial(5), 120f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(ln_binomial(5, 2), 10f64.ln(), max_relative = 1e-14);
        assert_eq!(ln_binomial(7, 0), 0.0);
    }

    #[test]
    fn logistic_is_stable() {
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(800.0) == 1.0);
        assert!(logistic(-800.0) == 0.0);
        assert!(ln_logistic(-800.0).is_finite());
        assert_relative_eq!(ln_logistic(-800.0), -800.0, max_relative = 1e-15);
        assert_relative_eq!(logistic(-2.57), 1.0 / (1.0 + 2.57f64.exp()), max_relative = 1e-15);
    }

    #[test]
    fn log_sum_exp() {
        assert_relative_eq!(ln_sum_exp(&[0.0, 0.0]), 2f64.ln());
        assert_eq!(ln_sum_exp(&[]), f64::NEG_INFINITY);
        assert_relative_eq!(ln_add_exp(1000.0, 1000.0), 1000.0 + 2f64.ln());
    }
}
