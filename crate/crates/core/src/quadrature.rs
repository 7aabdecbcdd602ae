//! Adaptive Gauss–Kronrod quadrature on log-density values.
//!
//! Integrands are supplied as `ln f(x)` and integrals come back as
//! `ln ∫ f`, so densities spanning hundreds of orders of magnitude are
//! accumulated with log-sum-exp instead of overflowing. Multi-dimensional
//! boxes are handled by nesting the 1-D rule one axis at a time.

use alloc::format;
use alloc::vec::Vec;

use libm::{exp, log};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_sum_exp;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Stop when the summed error estimate falls below this fraction of the total.
    pub rel_tol: f64,
    /// Upper limit on subintervals per 1-D integral.
    pub max_intervals: usize,
    /// Equal pieces the interval is split into before adapting.
    pub initial_pieces: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-5, max_intervals: 96, initial_pieces: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogIntegral {
    pub log_value: f64,
    /// `ln` of the absolute error estimate.
    pub log_error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    log_value: f64,
    log_error: f64,
}

fn gk15<F: FnMut(f64) -> Result<f64>>(f: &mut F, a: f64, b: f64) -> Result<Piece> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut lv = [0.0f64; 15];
    lv[7] = f(center)?;
    for i in 0..7 {
        lv[i] = f(center - half * XGK[i])?;
        lv[14 - i] = f(center + half * XGK[i])?;
    }
    let max = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(Piece { a, b, log_value: f64::NEG_INFINITY, log_error: f64::NEG_INFINITY });
    }
    let w = |i: usize| exp(lv[i] - max);
    let mut kronrod = WGK[7] * w(7);
    let mut gauss = WG[3] * w(7);
    for i in 0..7 {
        let pair = w(i) + w(14 - i);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let log_value = max + log(kronrod * half);
    let diff = (kronrod - gauss).abs() * half;
    let log_error = if diff > 0.0 { max + log(diff) } else { f64::NEG_INFINITY };
    Ok(Piece { a, b, log_value, log_error })
}

fn check_log_value(v: f64, at: &dyn Fn() -> alloc::string::String) -> Result<f64> {
    if v.is_nan() || v == f64::INFINITY {
        Err(Error::NonFiniteKernel(at()))
    } else {
        Ok(v)
    }
}

/// `ln ∫_a^b exp(log_f(x)) dx` by globally adaptive G7–K15 bisection.
pub fn integrate_log_1d<F>(log_f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<LogIntegral>
where
    F: FnMut(f64) -> Result<f64>,
{
    adaptive(log_f, a, b, cfg, f64::NEG_INFINITY)
}

/// As [`integrate_log_1d`], but also stops once the error estimate is below
/// `exp(log_abs_tol)`.
fn adaptive<F>(mut log_f: F, a: f64, b: f64, cfg: &QuadConfig, log_abs_tol: f64) -> Result<LogIntegral>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a < b) {
        return Ok(LogIntegral { log_value: f64::NEG_INFINITY, log_error: f64::NEG_INFINITY, evaluations: 0 });
    }
    let mut evaluations = 0usize;
    let mut f = |x: f64| {
        evaluations += 1;
        let v = log_f(x)?;
        check_log_value(v, &|| format!("x = {x}"))
    };
    let pieces = cfg.initial_pieces.max(1);
    let width = (b - a) / pieces as f64;
    let mut parts: Vec<Piece> = Vec::with_capacity(cfg.max_intervals.max(pieces) + 2);
    for i in 0..pieces {
        let lo = a + width * i as f64;
        let hi = if i + 1 == pieces { b } else { lo + width };
        parts.push(gk15(&mut f, lo, hi)?);
    }
    let ln_tol = log(cfg.rel_tol);
    loop {
        let vals: Vec<f64> = parts.iter().map(|p| p.log_value).collect();
        let errs: Vec<f64> = parts.iter().map(|p| p.log_error).collect();
        let total = ln_sum_exp(&vals);
        let err = ln_sum_exp(&errs);
        if total == f64::NEG_INFINITY || err - total <= ln_tol || err <= log_abs_tol || parts.len() >= cfg.max_intervals
        {
            return Ok(LogIntegral { log_value: total, log_error: err, evaluations });
        }
        let (worst, _) =
            parts.iter().enumerate().max_by(|x, y| x.1.log_error.total_cmp(&y.1.log_error)).expect("non-empty");
        let p = parts.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        parts.push(gk15(&mut f, p.a, mid)?);
        parts.push(gk15(&mut f, mid, p.b)?);
    }
}

fn nest<F>(
    log_f: &F,
    bounds: &[(f64, f64)],
    dim: usize,
    point: &mut [f64],
    evals: &mut usize,
    cfg: &QuadConfig,
    log_abs: f64,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if dim == bounds.len() {
        *evals += 1;
        let v = log_f(point);
        return check_log_value(v, &|| format!("{point:?}"));
    }
    let (a, b) = bounds[dim];
    // Inner errors are summed over this axis, so each gets the share per unit length.
    let inner_abs = log_abs - log(b - a);
    let inner = |x: f64| {
        point[dim] = x;
        nest(log_f, bounds, dim + 1, point, evals, cfg, inner_abs)
    };
    Ok(adaptive(inner, a, b, cfg, log_abs)?.log_value)
}

/// `ln ∫_box exp(log_f)` over an axis-aligned box, nesting the 1-D rule
/// with axis 0 outermost. The reported error is that of the outer axis.
pub fn integrate_log_box<F>(log_f: F, bounds: &[(f64, f64)], cfg: &QuadConfig) -> Result<LogIntegral>
where
    F: Fn(&[f64]) -> f64,
{
    integrate_log_box_scaled(log_f, bounds, cfg, None)
}

/// As [`integrate_log_box`], with `log_scale` the log of a reference total
/// (for example the integral over a larger domain). Every nested integral then
/// also stops once its contribution to the error is below `rel_tol` times
/// that total, so boxes carrying negligible mass are cheap.
pub fn integrate_log_box_scaled<F>(
    log_f: F,
    bounds: &[(f64, f64)],
    cfg: &QuadConfig,
    log_scale: Option<f64>,
) -> Result<LogIntegral>
where
    F: Fn(&[f64]) -> f64,
{
    if bounds.is_empty() {
        return Err(Error::InvalidConfig("empty integration box"));
    }
    let log_abs = log_scale.map_or(f64::NEG_INFINITY, |s| s + log(cfg.rel_tol));
    let mut point = alloc::vec![0.0; bounds.len()];
    let mut evals = 0usize;
    let point_ref = &mut point;
    let evals_ref = &mut evals;
    let (a, b) = bounds[0];
    let inner_abs = log_abs - log(b - a);
    let outer = adaptive(
        |x| {
            point_ref[0] = x;
            nest(&log_f, bounds, 1, point_ref, evals_ref, cfg, inner_abs)
        },
        a,
        b,
        cfg,
        log_abs,
    )?;
    Ok(LogIntegral { evaluations: evals, ..outer })
}

/// Disjoint boxes covering `outer \ inner`, where `inner ⊆ outer`.
pub fn box_difference(inner: &[(f64, f64)], outer: &[(f64, f64)]) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    if inner.is_empty() {
        return out;
    }
    let (il, ih) = inner[0];
    let (ol, oh) = outer[0];
    let rest_outer = &outer[1..];
    let with_rest = |lo: f64, hi: f64, out: &mut Vec<Vec<(f64, f64)>>| {
        if hi > lo {
            let mut b = alloc::vec![(lo, hi)];
            b.extend_from_slice(rest_outer);
            out.push(b);
        }
    };
    with_rest(ol, il, &mut out);
    with_rest(ih, oh, &mut out);
    for mut tail in box_difference(&inner[1..], rest_outer) {
        let mut b = alloc::vec![(il, ih)];
        b.append(&mut tail);
        out.push(b);
    }
    out
}
