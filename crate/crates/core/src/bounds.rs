//! Explicit lower and upper bounds on the Beta-Binomial likelihood.
//!
//! All quantities are logarithms of the beta-function ratio
//! `B(y + r pE, n − y + r qE) / B(r pE, r qE)`, binomial coefficient excluded.
//!
//! | group kind      | lower                      | upper              |
//! |-----------------|----------------------------|--------------------|
//! | interior        | `r² pE qE / ∏_{i<n}(i + r)` | `r pE qE / (1 + r)` |
//! | all successes   | `pE^n`                     | `pE`               |
//! | all failures    | `qE^n`                     | `qE`               |
//!
//! The interior lower bound also has a relaxed form
//! `r pE qE / (n^(n−1) (1 + r)^(n−1))`, reported as `relaxed_lower_log`.

use alloc::vec::Vec;

use libm::{log, log1p};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{log_likelihood_ratio_part, Dataset, Group, GroupKind};
use crate::special::{ln_logistic, ln_rising, ln_shift};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub n: u32,
    /// `ln ∏_{i=0}^{n−1} (i + r)`; zero for extreme groups.
    pub ln_rising_r: f64,
    /// `−(n − 1) ln n`, the multiplier of the relaxed interior lower bound.
    pub ln_relaxation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupBound {
    pub lower_log: f64,
    pub upper_log: f64,
    pub relaxed_lower_log: Option<f64>,
    pub kind: GroupKind,
    pub constants: BoundConstants,
}

fn bounds_from_logs(group: &Group, ln_r: f64, ln_p: f64, ln_q: f64) -> GroupBound {
    let n = group.n();
    let nf = f64::from(n);
    match group.kind() {
        GroupKind::Interior => {
            let ln_rising_r = ln_rising(ln_r, u64::from(n));
            let ln_pq = ln_p + ln_q;
            let ln_1pr = ln_shift(ln_r, 1);
            let ln_relaxation = -(nf - 1.0) * log(nf);
            GroupBound {
                lower_log: 2.0 * ln_r + ln_pq - ln_rising_r,
                upper_log: ln_r + ln_pq - ln_1pr,
                relaxed_lower_log: Some(ln_relaxation + ln_r + ln_pq - (nf - 1.0) * ln_1pr),
                kind: GroupKind::Interior,
                constants: BoundConstants { n, ln_rising_r, ln_relaxation },
            }
        }
        kind @ (GroupKind::ExtremeSuccess | GroupKind::ExtremeFailure) => {
            let ln = if kind == GroupKind::ExtremeSuccess { ln_p } else { ln_q };
            GroupBound {
                lower_log: nf * ln,
                upper_log: ln,
                relaxed_lower_log: None,
                kind,
                constants: BoundConstants { n, ln_rising_r: 0.0, ln_relaxation: 0.0 },
            }
        }
    }
}

/// Bounds on one group's beta-function ratio at `(r, pE)`.
pub fn group_bounds(group: &Group, r: f64, p_e: f64) -> Result<GroupBound> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::NonPositiveR(r));
    }
    if !(p_e > 0.0 && p_e < 1.0) {
        return Err(Error::InvalidExpectedEffect(p_e));
    }
    Ok(bounds_from_logs(group, log(r), log(p_e), log1p(-p_e)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub lower_log: f64,
    pub upper_log: f64,
}

/// Sum of per-group bounds: a sandwich for `ln L(r, β)` with binomial
/// coefficients excluded on every side.
pub fn likelihood_sandwich(data: &Dataset, r: f64, beta: &[f64]) -> Result<Sandwich> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::NonPositiveR(r));
    }
    if beta.len() != data.m() {
        return Err(Error::DimensionMismatch { expected: data.m(), found: beta.len() });
    }
    let ln_r = log(r);
    let mut out = Sandwich { lower_log: 0.0, upper_log: 0.0 };
    for g in data.groups() {
        let eta: f64 = g.x().iter().zip(beta).map(|(x, b)| x * b).sum();
        let b = bounds_from_logs(g, ln_r, ln_logistic(eta), ln_logistic(-eta));
        out.lower_log += b.lower_log;
        out.upper_log += b.upper_log;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub points: usize,
    /// Largest amount, in log units, by which any bound was crossed.
    /// Non-positive when every point is inside its sandwich.
    pub max_violation: f64,
    pub violations: usize,
    pub slack: f64,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Default log-slack allowed by [`sandwich_audit`].
pub const AUDIT_SLACK: f64 = 1e-10;

/// Checks `lower ≤ ln L − Σ ln C(n_j, y_j) ≤ upper` at every grid point.
pub fn sandwich_audit<'a, I>(data: &Dataset, grid: I, slack: f64) -> Result<AuditReport>
where
    I: IntoIterator<Item = (f64, &'a [f64])>,
{
    let mut report = AuditReport { points: 0, max_violation: f64::NEG_INFINITY, violations: 0, slack };
    for (r, beta) in grid {
        let value = log_likelihood_ratio_part(data, r, beta)?;
        let s = likelihood_sandwich(data, r, beta)?;
        let v = (s.lower_log - value).max(value - s.upper_log);
        report.points += 1;
        report.max_violation = report.max_violation.max(v);
        if v > slack {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Log-spaced grid helper: `count` points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (log(lo), log(hi));
    (0..count).map(|i| libm::exp(a + (b - a) * i as f64 / (count.max(2) - 1) as f64)).collect()
}
