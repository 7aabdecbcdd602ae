//! Beta-Binomial-Logit hierarchical model: likelihood and prior math, exact
//! posterior-propriety decisions, a brute-force integration oracle and a
//! posterior sampler.
//!
//! The crate is `no_std` with `alloc`. Enable the `std` feature to link the
//! standard library (no API changes).

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod propriety;
pub mod quadrature;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
pub use model::{BetaPrior, Dataset, GaussianPrior, Group, GroupKind, HyperPriorSpec, LogKernel, RPrior};
pub use oracle::{cross_validate, integrate_posterior, tail_slope, Decision, OracleConfig, OracleReport};
pub use propriety::{classify, decide, ClassificationResult, ProprietyVerdict, Status, ThresholdMode};
pub use sampler::{sample_posterior, summarize, PosteriorDraws, SamplerConfig};
