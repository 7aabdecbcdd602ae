//! Interior/extreme classification and the data-dependent propriety decision.
//!
//! A group is *interior* when `1 ≤ y_j ≤ n_j − 1` and *extreme* otherwise.
//! When at least one interior group exists the decision depends only on the
//! interior groups: their count `k_y` and the rank of their design `X_y`.
//! With no interior group the decision depends on the extreme tallies.
//!
//! For improper power priors `dr / r^(u+1)` the interior-count threshold is
//! available in two forms: [`ThresholdMode::Literal`] tests `k_y ≥ u + 1`,
//! [`ThresholdMode::Corrected`] tests `k_y > u`, which is what the likelihood
//! bounds give (the `r`-integrand behaves like `r^(k_y − u − 1)` near zero).
//! The two agree for integer `u`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank, Matrix, RankTolerance};
use crate::model::{BetaPrior, Dataset, GroupKind, HyperPriorSpec, RPrior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    /// Indices of interior groups, ascending.
    pub interior_idx: Vec<usize>,
    pub k_y: usize,
    /// Design rows of the interior groups.
    pub x_y: Matrix,
    pub rank_xy: usize,
    pub extreme_success_count: usize,
    pub extreme_failure_count: usize,
    pub k: usize,
    pub m: usize,
}

pub fn classify(data: &Dataset) -> ClassificationResult {
    classify_with(data, &RankTolerance::default())
}

pub fn classify_with(data: &Dataset, tol: &RankTolerance) -> ClassificationResult {
    let mut interior_idx = Vec::new();
    let (mut succ, mut fail) = (0, 0);
    for (i, g) in data.groups().iter().enumerate() {
        match g.kind() {
            GroupKind::Interior => interior_idx.push(i),
            GroupKind::ExtremeSuccess => succ += 1,
            GroupKind::ExtremeFailure => fail += 1,
        }
    }
    let rows: Vec<&[f64]> = interior_idx.iter().map(|&i| data.groups()[i].x()).collect();
    let x_y = Matrix::from_rows(&rows, data.m()).expect("rows share length m");
    let rank_xy = rank(&x_y, tol);
    ClassificationResult {
        k_y: interior_idx.len(),
        interior_idx,
        x_y,
        rank_xy,
        extreme_success_count: succ,
        extreme_failure_count: fail,
        k: data.k(),
        m: data.m(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Proper,
    Improper,
    Unknown,
}

/// Which interior-count threshold to apply under `dr / r^(u+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// `k_y ≥ u + 1`, as tabulated in the original conditions.
    Literal,
    /// `k_y > u`.
    #[default]
    Corrected,
}

impl ThresholdMode {
    pub fn other(self) -> Self {
        match self {
            ThresholdMode::Literal => ThresholdMode::Corrected,
            ThresholdMode::Corrected => ThresholdMode::Literal,
        }
    }

    pub fn holds(self, k_y: usize, u: f64) -> bool {
        let k = k_y as f64;
        match self {
            ThresholdMode::Literal => k >= u + 1.0,
            ThresholdMode::Corrected => k > u,
        }
    }
}

/// Cell of the decision table that applies to a dataset and hyper-prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionCell {
    /// `f(r) ∝ 1/r`, for any data.
    DrOverR,
    InteriorProperRProperBeta,
    InteriorProperRFlatBeta,
    InteriorPowerRProperBeta,
    InteriorPowerRFlatBeta,
    /// `k_y = 0` with an improper `f`.
    AllExtremeImproperR,
    AllExtremeProperRProperBeta,
    AllExtremeProperRFlatBetaIntercept,
    AllExtremeProperRFlatBetaCovariates,
}

/// The quantity a decision record tested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "kebab-case")]
pub enum Condition {
    /// `dr / r` gives an improper posterior regardless of the data.
    DrOverRImproper,
    /// Both priors proper.
    ProperPriors,
    /// `rank(X_y) = m`; needs `k_y ≥ m`.
    FullInteriorRank { rank: usize, m: usize, k_y: usize },
    /// Interior-count threshold for `dr / r^(u+1)`.
    InteriorCount { k_y: usize, u: f64, mode: ThresholdMode },
    /// No interior group under an improper `f`.
    NoInteriorWithImproperR,
    /// At least one all-success group.
    HasAllSuccessGroup { count: usize },
    /// At least one all-failure group.
    HasAllFailureGroup { count: usize },
    /// All groups extreme, flat `g`, non-intercept design: unresolved.
    UnresolvedCovariateCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub cell: DecisionCell,
    pub condition: Condition,
    pub passed: bool,
}

impl fmt::Display for ConditionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "holds" } else { "fails" };
        match &self.condition {
            Condition::DrOverRImproper => write!(f, "f(r) = 1/r is improper for any data"),
            Condition::ProperPriors => write!(f, "proper f(r) and proper g(beta): always proper"),
            Condition::FullInteriorRank { rank, m, k_y } => {
                write!(f, "rank(X_y) = m {verdict} (rank {rank}, m = {m}, k_y = {k_y})")?;
                if k_y < m {
                    write!(f, "; fewer interior groups than covariates")?;
                }
                Ok(())
            }
            Condition::InteriorCount { k_y, u, mode } => {
                let rule = match mode {
                    ThresholdMode::Literal => format!("k_y >= u + 1 ({k_y} >= {})", fmt_real(u + 1.0)),
                    ThresholdMode::Corrected => format!("k_y > u ({k_y} > {})", fmt_real(*u)),
                };
                write!(f, "{rule} {verdict}")
            }
            Condition::NoInteriorWithImproperR => {
                write!(f, "no interior group with improper f(r): never proper")
            }
            Condition::HasAllSuccessGroup { count } => {
                write!(f, "at least one all-success group {verdict} ({count} found)")
            }
            Condition::HasAllFailureGroup { count } => {
                write!(f, "at least one all-failure group {verdict} ({count} found)")
            }
            Condition::UnresolvedCovariateCase => {
                write!(f, "all groups extreme with flat g(beta) and covariates: propriety not resolved analytically")
            }
        }
    }
}

fn fmt_real(v: f64) -> String {
    if v == libm::trunc(v) && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProprietyVerdict {
    pub status: Status,
    pub reasons: Vec<ConditionRecord>,
    pub mode: ThresholdMode,
    /// The other threshold mode reaches a different status.
    pub discrepancy_flag: bool,
}

impl ProprietyVerdict {
    /// First failing record, or the deciding record for `Unknown`.
    pub fn failed_condition(&self) -> Option<&ConditionRecord> {
        self.reasons.iter().find(|r| !r.passed)
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self.reasons.iter().map(|r| format!("{r}")).collect();
        parts.join("; ")
    }
}

pub fn decide(data: &Dataset, hp: &HyperPriorSpec, mode: ThresholdMode) -> Result<ProprietyVerdict> {
    decide_with(data, hp, mode, &RankTolerance::default())
}

pub fn decide_with(
    data: &Dataset,
    hp: &HyperPriorSpec,
    mode: ThresholdMode,
    tol: &RankTolerance,
) -> Result<ProprietyVerdict> {
    hp.validate_for(data)?;
    let c = classify_with(data, tol);
    let (status, reasons) = evaluate(&c, data, hp, mode);
    let (other, _) = evaluate(&c, data, hp, mode.other());
    Ok(ProprietyVerdict { status, reasons, mode, discrepancy_flag: other != status })
}

fn evaluate(
    c: &ClassificationResult,
    data: &Dataset,
    hp: &HyperPriorSpec,
    mode: ThresholdMode,
) -> (Status, Vec<ConditionRecord>) {
    let record = |cell, condition, passed| ConditionRecord { cell, condition, passed };
    let rank_record =
        |cell| record(cell, Condition::FullInteriorRank { rank: c.rank_xy, m: c.m, k_y: c.k_y }, c.rank_xy == c.m);
    let status_of = |ok: bool| if ok { Status::Proper } else { Status::Improper };
    let flat = matches!(hp.g, BetaPrior::Flat);

    let RPrior::PowerLaw { t, u } = hp.f else {
        return (Status::Improper, alloc::vec![record(DecisionCell::DrOverR, Condition::DrOverRImproper, false)]);
    };
    let proper_f = t > 0.0;

    if c.k_y >= 1 {
        match (proper_f, flat) {
            (true, false) => (
                Status::Proper,
                alloc::vec![record(DecisionCell::InteriorProperRProperBeta, Condition::ProperPriors, true)],
            ),
            (true, true) => {
                let r = rank_record(DecisionCell::InteriorProperRFlatBeta);
                (status_of(r.passed), alloc::vec![r])
            }
            (false, false) => {
                let ok = mode.holds(c.k_y, u);
                (
                    status_of(ok),
                    alloc::vec![record(
                        DecisionCell::InteriorPowerRProperBeta,
                        Condition::InteriorCount { k_y: c.k_y, u, mode },
                        ok,
                    )],
                )
            }
            (false, true) => {
                let cell = DecisionCell::InteriorPowerRFlatBeta;
                let ok = mode.holds(c.k_y, u);
                let count = record(cell, Condition::InteriorCount { k_y: c.k_y, u, mode }, ok);
                let r = rank_record(cell);
                (status_of(count.passed && r.passed), alloc::vec![count, r])
            }
        }
    } else if !proper_f {
        (
            Status::Improper,
            alloc::vec![record(DecisionCell::AllExtremeImproperR, Condition::NoInteriorWithImproperR, false)],
        )
    } else if !flat {
        (Status::Proper, alloc::vec![record(DecisionCell::AllExtremeProperRProperBeta, Condition::ProperPriors, true)])
    } else if data.is_intercept_only() {
        let cell = DecisionCell::AllExtremeProperRFlatBetaIntercept;
        let s = record(
            cell,
            Condition::HasAllSuccessGroup { count: c.extreme_success_count },
            c.extreme_success_count >= 1,
        );
        let f = record(
            cell,
            Condition::HasAllFailureGroup { count: c.extreme_failure_count },
            c.extreme_failure_count >= 1,
        );
        (status_of(s.passed && f.passed), alloc::vec![s, f])
    } else {
        (
            Status::Unknown,
            alloc::vec![record(
                DecisionCell::AllExtremeProperRFlatBetaCovariates,
                Condition::UnresolvedCovariateCase,
                false,
            )],
        )
    }
}

/// Checks that dropping every extreme group leaves both threshold modes'
/// verdicts unchanged. Requires at least one interior group.
pub fn verdict_invariance_check(data: &Dataset, hp: &HyperPriorSpec) -> Result<bool> {
    let c = classify(data);
    let reduced = data
        .subset(&c.interior_idx)
        .ok_or(Error::InvalidConfig("invariance check needs at least one interior group"))?;
    for mode in [ThresholdMode::Literal, ThresholdMode::Corrected] {
        let full = decide(data, hp, mode)?;
        let red = decide(&reduced, hp, mode)?;
        if full.status != red.status || full.discrepancy_flag != red.discrepancy_flag {
            return Ok(false);
        }
    }
    Ok(true)
}
