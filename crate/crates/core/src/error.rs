use alloc::string::String;

use thiserror::Error;

use crate::propriety::Status;

/// Errors raised by the model, decision and sampling routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no groups")]
    NoGroups,
    #[error("group {index}: {reason}")]
    InvalidGroup { index: usize, reason: &'static str },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("r must be positive and finite, got {0}")]
    NonPositiveR(f64),
    #[error("pE must lie strictly inside (0, 1), got {0}")]
    InvalidExpectedEffect(f64),
    #[error("invalid hyper-prior: {0}")]
    InvalidHyperPrior(&'static str),
    #[error(
        "the standard logistic prior on beta requires an intercept-only design (m = 1, common non-zero covariate)"
    )]
    LogisticPriorNeedsIntercept,
    #[error("the integration oracle supports m <= 2 covariates, got m = {0}")]
    OracleDimension(usize),
    #[error("non-finite kernel value at {0}")]
    NonFiniteKernel(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("sampling refused: posterior is {status:?}; failed condition: {condition}")]
    SamplingRefused { status: Status, condition: String },
}

pub type Result<T> = core::result::Result<T, Error>;
