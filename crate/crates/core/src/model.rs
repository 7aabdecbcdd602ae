//! Beta-Binomial-Logit model mathematics.
//!
//! For group `j` with `y_j` successes out of `n_j` trials the model is
//!
//! ```text
//! y_j | p_j      ~ Bin(n_j, p_j)
//! p_j | r, β     ~ Beta(r pE_j, r qE_j),   pE_j = logistic(x_j · β),  qE_j = 1 − pE_j
//! ```
//!
//! and the marginal likelihood of `(r, β)` is a product of Beta-Binomial
//! probabilities. Everything here is evaluated in the log domain. Beta-function
//! ratios are expanded into rising factorials (see [`crate::special::ln_rising`])
//! so that `r` can range over hundreds of orders of magnitude without loss.
//!
//! The binomial coefficients are included in [`log_likelihood`] and
//! [`log_bb_pmf`]. They are constant in `(r, β)`; [`log_beta_ratio`] and
//! [`log_likelihood_ratio_part`] leave them out for the bound audits.

use alloc::vec::Vec;

use libm::{exp, log, log1p};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, solve_lower, Matrix};
use crate::special::{ln_add_exp, ln_binomial, ln_logistic, ln_rising, logistic};

/// Observed counts and covariate row of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    n: u32,
    y: u32,
    x: Vec<f64>,
}

/// Interior groups saw at least one success and one failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    Interior,
    ExtremeSuccess,
    ExtremeFailure,
}

impl Group {
    pub fn new(n: u32, y: u32, x: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGroup { index: 0, reason: "n must be at least 1" });
        }
        if y > n {
            return Err(Error::InvalidGroup { index: 0, reason: "y exceeds n" });
        }
        if x.is_empty() {
            return Err(Error::InvalidGroup { index: 0, reason: "empty covariate row" });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGroup { index: 0, reason: "non-finite covariate" });
        }
        Ok(Self { n, y, x })
    }

    /// Intercept-only group: `x = [1]`.
    pub fn intercept(n: u32, y: u32) -> Result<Self> {
        Self::new(n, y, alloc::vec![1.0])
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn y(&self) -> u32 {
        self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn kind(&self) -> GroupKind {
        if self.y == 0 {
            GroupKind::ExtremeFailure
        } else if self.y == self.n {
            GroupKind::ExtremeSuccess
        } else {
            GroupKind::Interior
        }
    }

    /// Observed proportion `y / n`.
    pub fn proportion(&self) -> f64 {
        f64::from(self.y) / f64::from(self.n)
    }
}

/// An ordered collection of groups sharing a covariate dimension `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    groups: Vec<Group>,
    m: usize,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    groups: Vec<Group>,
}

impl TryFrom<DatasetRepr> for Dataset {
    type Error = Error;
    fn try_from(r: DatasetRepr) -> Result<Self> {
        Dataset::new(r.groups)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(d: Dataset) -> Self {
        DatasetRepr { groups: d.groups }
    }
}

impl Dataset {
    pub fn new(groups: Vec<Group>) -> Result<Self> {
        let first = groups.first().ok_or(Error::NoGroups)?;
        let m = first.x.len();
        for (index, g) in groups.iter().enumerate() {
            if g.x.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: g.x.len() });
            }
            // Re-check in case the group was deserialized.
            Group::new(g.n, g.y, g.x.clone()).map_err(|e| match e {
                Error::InvalidGroup { reason, .. } => Error::InvalidGroup { index, reason },
                other => other,
            })?;
        }
        Ok(Self { groups, m })
    }

    /// Intercept-only data from `(n, y)` pairs.
    pub fn intercept_only(counts: &[(u32, u32)]) -> Result<Self> {
        let groups = counts
            .iter()
            .enumerate()
            .map(|(index, &(n, y))| {
                Group::intercept(n, y).map_err(|e| match e {
                    Error::InvalidGroup { reason, .. } => Error::InvalidGroup { index, reason },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(groups)
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Number of groups `k`.
    pub fn k(&self) -> usize {
        self.groups.len()
    }

    /// Covariate dimension `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// The `k × m` design matrix.
    pub fn design(&self) -> Matrix {
        let rows: Vec<&[f64]> = self.groups.iter().map(|g| g.x.as_slice()).collect();
        Matrix::from_rows(&rows, self.m).expect("rows share length m")
    }

    /// Groups at the given indices, in that order. `None` when no index is given.
    pub fn subset(&self, indices: &[usize]) -> Option<Self> {
        if indices.is_empty() {
            return None;
        }
        let groups = indices.iter().map(|&i| self.groups[i].clone()).collect();
        Some(Self { groups, m: self.m })
    }

    /// Appends groups, checking their dimension.
    pub fn with_groups(&self, extra: impl IntoIterator<Item = Group>) -> Result<Self> {
        let mut groups = self.groups.clone();
        groups.extend(extra);
        Self::new(groups)
    }

    /// `m = 1` with one common non-zero covariate value, so every linear
    /// predictor is the same scalar multiple of `β₁`.
    pub fn is_intercept_only(&self) -> bool {
        if self.m != 1 {
            return false;
        }
        let c = self.groups[0].x[0];
        c != 0.0 && self.groups.iter().all(|g| g.x[0] == c)
    }

    fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, found: beta.len() });
        }
        Ok(())
    }
}

/// Prior on the prior sample size `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum RPrior {
    /// `dr / (t + r)^(u+1)`; proper iff `t > 0`.
    PowerLaw { t: f64, u: f64 },
    /// `dr / r`, improper for every dataset.
    DrOverR,
}

impl RPrior {
    pub fn power_law(t: f64, u: f64) -> Result<Self> {
        let p = RPrior::PowerLaw { t, u };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RPrior::PowerLaw { t, u } => {
                if !(t >= 0.0) || !t.is_finite() {
                    return Err(Error::InvalidHyperPrior("t must be finite and >= 0"));
                }
                if !(u > 0.0) || !u.is_finite() {
                    return Err(Error::InvalidHyperPrior("u must be finite and > 0"));
                }
                Ok(())
            }
            RPrior::DrOverR => Ok(()),
        }
    }

    pub fn is_proper(&self) -> bool {
        matches!(*self, RPrior::PowerLaw { t, .. } if t > 0.0)
    }

    /// Unnormalized `ln f(r)` from `ln r`.
    pub fn ln_density(&self, ln_r: f64) -> f64 {
        match *self {
            RPrior::PowerLaw { t, u } => {
                let ln_tr = if t == 0.0 { ln_r } else { ln_add_exp(log(t), ln_r) };
                -(u + 1.0) * ln_tr
            }
            RPrior::DrOverR => -ln_r,
        }
    }
}

/// Multivariate normal prior on `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianPrior {
    mean: Vec<f64>,
    covariance: Matrix,
    chol: Matrix,
    ln_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    covariance: Matrix,
}

impl TryFrom<GaussianRepr> for GaussianPrior {
    type Error = Error;
    fn try_from(r: GaussianRepr) -> Result<Self> {
        GaussianPrior::new(r.mean, r.covariance)
    }
}

impl From<GaussianPrior> for GaussianRepr {
    fn from(g: GaussianPrior) -> Self {
        GaussianRepr { mean: g.mean, covariance: g.covariance }
    }
}

impl GaussianPrior {
    pub fn new(mean: Vec<f64>, covariance: Matrix) -> Result<Self> {
        if covariance.rows() != mean.len() || covariance.cols() != mean.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), found: covariance.rows() });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidHyperPrior("non-finite Gaussian mean"));
        }
        let chol = cholesky(&covariance)?;
        let d = mean.len() as f64;
        let ln_det_half: f64 = (0..mean.len()).map(|i| log(chol[(i, i)])).sum();
        let ln_norm = 0.5 * d * log(2.0 * core::f64::consts::PI) + ln_det_half;
        Ok(Self { mean, covariance, chol, ln_norm })
    }

    /// Standard normal in `m` dimensions scaled by `sd`.
    pub fn isotropic(m: usize, sd: f64) -> Result<Self> {
        let mut cov = Matrix::identity(m);
        for i in 0..m {
            cov[(i, i)] = sd * sd;
        }
        Self::new(alloc::vec![0.0; m], cov)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn ln_density(&self, beta: &[f64]) -> f64 {
        let centered: Vec<f64> = beta.iter().zip(&self.mean).map(|(b, m)| b - m).collect();
        let z = solve_lower(&self.chol, &centered);
        -0.5 * dot(&z, &z) - self.ln_norm
    }
}

/// Prior on the regression coefficients `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum BetaPrior {
    /// Lebesgue measure on `R^m`.
    Flat,
    /// Standard logistic density on `β₁`; intercept-only designs only.
    StandardLogisticIntercept,
    Gaussian(GaussianPrior),
}

impl BetaPrior {
    pub fn is_proper(&self) -> bool {
        !matches!(self, BetaPrior::Flat)
    }

    /// `ln g(β)`; zero for the flat prior.
    pub fn ln_density(&self, beta: &[f64]) -> f64 {
        match self {
            BetaPrior::Flat => 0.0,
            BetaPrior::StandardLogisticIntercept => ln_logistic(beta[0]) + ln_logistic(-beta[0]),
            BetaPrior::Gaussian(g) => g.ln_density(beta),
        }
    }
}

/// Joint hyper-prior `f(r) g(β)`, with `r` and `β` independent a priori.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPriorSpec {
    pub f: RPrior,
    pub g: BetaPrior,
}

impl HyperPriorSpec {
    pub fn new(f: RPrior, g: BetaPrior) -> Result<Self> {
        f.validate()?;
        Ok(Self { f, g })
    }

    /// Checks the prior against a dataset's design.
    pub fn validate_for(&self, data: &Dataset) -> Result<()> {
        self.f.validate()?;
        match &self.g {
            BetaPrior::Flat => Ok(()),
            BetaPrior::StandardLogisticIntercept => {
                if data.is_intercept_only() {
                    Ok(())
                } else {
                    Err(Error::LogisticPriorNeedsIntercept)
                }
            }
            BetaPrior::Gaussian(g) => {
                if g.dim() == data.m() {
                    Ok(())
                } else {
                    Err(Error::DimensionMismatch { expected: data.m(), found: g.dim() })
                }
            }
        }
    }

    /// `ln f(r) + ln g(β)` from `ln r`.
    pub fn ln_density(&self, ln_r: f64, beta: &[f64]) -> f64 {
        self.f.ln_density(ln_r) + self.g.ln_density(beta)
    }
}

/// Expected random effects `pE_j = logistic(x_j · β)` and their complements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRandomEffects {
    pub p_e: Vec<f64>,
    pub q_e: Vec<f64>,
}

/// Parameters of the conditional posteriors `p_j | r, β, y ~ Beta(alpha_j, beta_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPosteriorParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ConditionalPosteriorParams {
    pub fn means(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.beta).map(|(a, b)| a / (a + b)).collect()
    }
}

/// Shrinkage factors and conditional posterior moments per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageSummary {
    /// `B_j = r / (r + n_j)`.
    pub shrinkage: Vec<f64>,
    /// `p̂_j = (1 − B_j) ȳ_j + B_j pE_j`.
    pub post_mean: Vec<f64>,
    /// `p̂_j (1 − p̂_j) / (r + n_j + 1)`.
    pub post_var: Vec<f64>,
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveR(r))
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidConfig("non-finite coefficient"))
    }
}

/// `pE_j = logistic(x_j · β)` for every row of `design`.
pub fn logistic_link(beta: &[f64], design: &Matrix) -> Result<ExpectedRandomEffects> {
    check_finite(beta)?;
    let eta = design.mul_vec(beta)?;
    Ok(ExpectedRandomEffects {
        p_e: eta.iter().map(|&e| logistic(e)).collect(),
        q_e: eta.iter().map(|&e| logistic(-e)).collect(),
    })
}

/// `ln [B(y + a, n − y + b) / B(a, b)]` with `a = r pE`, `b = r qE`, all
/// passed as logarithms.
#[inline]
pub fn log_beta_ratio(n: u32, y: u32, ln_r: f64, ln_p: f64, ln_q: f64) -> f64 {
    let (n, y) = (u64::from(n), u64::from(y));
    ln_rising(ln_r + ln_p, y) + ln_rising(ln_r + ln_q, n - y) - ln_rising(ln_r, n)
}

fn check_p(p_e: f64) -> Result<()> {
    if p_e > 0.0 && p_e < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExpectedEffect(p_e))
    }
}

/// Log Beta-Binomial probability of `group.y` given `r` and `pE`.
pub fn log_bb_pmf(group: &Group, r: f64, p_e: f64) -> Result<f64> {
    check_r(r)?;
    check_p(p_e)?;
    let ratio = log_beta_ratio(group.n, group.y, log(r), log(p_e), log1p(-p_e));
    Ok(ln_binomial(u64::from(group.n), u64::from(group.y)) + ratio)
}

/// Sum of log Beta-Binomial probabilities over groups, binomial
/// coefficients excluded. Inputs are `ln r` and the linear predictor.
pub(crate) fn ratio_part_from_eta(data: &Dataset, ln_r: f64, beta: &[f64]) -> f64 {
    data.groups
        .iter()
        .map(|g| {
            let eta = dot(&g.x, beta);
            log_beta_ratio(g.n, g.y, ln_r, ln_logistic(eta), ln_logistic(-eta))
        })
        .sum()
}

/// `ln L(r, β)` without the binomial coefficients.
pub fn log_likelihood_ratio_part(data: &Dataset, r: f64, beta: &[f64]) -> Result<f64> {
    check_r(r)?;
    data.check_beta(beta)?;
    check_finite(beta)?;
    Ok(ratio_part_from_eta(data, log(r), beta))
}

/// `Σ_j ln C(n_j, y_j)`.
pub fn log_binomial_terms(data: &Dataset) -> f64 {
    data.groups.iter().map(|g| ln_binomial(u64::from(g.n), u64::from(g.y))).sum()
}

/// `ln L(r, β)`, binomial coefficients included.
pub fn log_likelihood(data: &Dataset, r: f64, beta: &[f64]) -> Result<f64> {
    Ok(log_likelihood_ratio_part(data, r, beta)? + log_binomial_terms(data))
}

/// Unnormalized log hyper-posterior `ln f(r) + ln g(β) + ln L(r, β)`.
pub fn log_hyper_posterior_kernel(data: &Dataset, hp: &HyperPriorSpec, r: f64, beta: &[f64]) -> Result<f64> {
    check_r(r)?;
    data.check_beta(beta)?;
    hp.validate_for(data)?;
    let ln_r = log(r);
    Ok(hp.ln_density(ln_r, beta) + log_likelihood(data, r, beta)?)
}

/// Validated kernel evaluator on `(s = ln r, β)`, shared by the oracle and
/// the sampler. The `s` form carries no Jacobian; callers add it.
#[derive(Debug, Clone)]
pub struct LogKernel<'a> {
    data: &'a Dataset,
    hp: &'a HyperPriorSpec,
    binomial_terms: f64,
}

impl<'a> LogKernel<'a> {
    pub fn new(data: &'a Dataset, hp: &'a HyperPriorSpec) -> Result<Self> {
        hp.validate_for(data)?;
        Ok(Self { data, hp, binomial_terms: log_binomial_terms(data) })
    }

    pub fn data(&self) -> &Dataset {
        self.data
    }

    pub fn hyper_prior(&self) -> &HyperPriorSpec {
        self.hp
    }

    /// `ln f(e^s) + ln g(β) + ln L(e^s, β)`.
    #[inline]
    pub fn at_log_r(&self, s: f64, beta: &[f64]) -> f64 {
        self.hp.ln_density(s, beta) + ratio_part_from_eta(self.data, s, beta) + self.binomial_terms
    }

    /// Density of `(s, β)`: the kernel plus the Jacobian `ln r = s`.
    #[inline]
    pub fn at_s_with_jacobian(&self, s: f64, beta: &[f64]) -> f64 {
        self.at_log_r(s, beta) + s
    }
}

/// Parameters of `Beta(r pE_j + y_j, r qE_j + n_j − y_j)` for each group.
pub fn conditional_posterior_params(data: &Dataset, r: f64, beta: &[f64]) -> Result<ConditionalPosteriorParams> {
    check_r(r)?;
    data.check_beta(beta)?;
    let pe = logistic_link(beta, &data.design())?;
    let alpha = data.groups.iter().zip(&pe.p_e).map(|(g, p)| r * p + f64::from(g.y)).collect();
    let beta = data.groups.iter().zip(&pe.q_e).map(|(g, q)| r * q + f64::from(g.n - g.y)).collect();
    Ok(ConditionalPosteriorParams { alpha, beta })
}

/// Shrinkage factors `B_j` with the conditional posterior means and variances.
pub fn shrinkage_summary(data: &Dataset, r: f64, beta: &[f64]) -> Result<ShrinkageSummary> {
    check_r(r)?;
    data.check_beta(beta)?;
    let pe = logistic_link(beta, &data.design())?;
    let mut out = ShrinkageSummary {
        shrinkage: Vec::with_capacity(data.k()),
        post_mean: Vec::with_capacity(data.k()),
        post_var: Vec::with_capacity(data.k()),
    };
    for (g, &p) in data.groups.iter().zip(&pe.p_e) {
        let n = f64::from(g.n);
        let b = r / (r + n);
        let mean = (1.0 - b) * g.proportion() + b * p;
        out.shrinkage.push(b);
        out.post_mean.push(mean);
        out.post_var.push(mean * (1.0 - mean) / (r + n + 1.0));
    }
    Ok(out)
}

/// `exp` of a log value, exposed for callers that want probabilities.
#[inline]
pub fn prob(log_value: f64) -> f64 {
    exp(log_value)
}
