//! Posterior draws of `(r, β, p_1..p_k)`.
//!
//! Hyper-parameters are sampled by random-walk Metropolis on `(s, β)` with
//! `s = ln r`. During burn-in the proposal covariance is the empirical
//! covariance of the chain so far and a global scale is pushed toward the
//! target acceptance rate; both are frozen once burn-in ends, so retained
//! draws come from a fixed, reversible kernel. Each retained hyper-draw is
//! followed by exact draws `p_j ~ Beta(r pE_j + y_j, r qE_j + n_j − y_j)`.
//!
//! Effective sample sizes use Geyer's initial positive sequence: pairs of
//! consecutive autocorrelations are summed until a pair turns non-positive.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};
use crate::model::{Dataset, HyperPriorSpec, LogKernel};
use crate::propriety::{decide, Status, ThresholdMode};
use crate::special::{ln_add_exp, logistic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub initial_s: f64,
    /// Starting `β`; zeros when absent.
    pub initial_beta: Option<Vec<f64>>,
    /// Adapt the proposal during burn-in.
    pub adapt: bool,
    pub target_acceptance: f64,
    /// Initial proposal standard deviation per coordinate.
    pub proposal_scale: f64,
    /// Permit sampling when the analytic verdict is `Unknown`.
    pub allow_unknown: bool,
    pub mode: ThresholdMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            draws: 10_000,
            burn_in: 2_000,
            thin: 1,
            seed: 0,
            initial_s: 0.0,
            initial_beta: None,
            adapt: true,
            target_acceptance: 0.3,
            proposal_scale: 0.5,
            allow_unknown: false,
            mode: ThresholdMode::Corrected,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(Error::InvalidConfig("draws must be at least 1"));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::InvalidConfig("target acceptance must lie in (0, 1)"));
        }
        if !(self.proposal_scale >= 0.0 && self.proposal_scale.is_finite()) {
            return Err(Error::InvalidConfig("proposal scale must be non-negative"));
        }
        Ok(())
    }
}

/// Settings of the generic Metropolis driver.
#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub adapt: bool,
    pub target_acceptance: f64,
    pub proposal_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisChain {
    /// Retained states, one row per kept iteration.
    pub states: Vec<Vec<f64>>,
    /// Acceptance rate over the retained (post burn-in) iterations.
    pub acceptance_rate: f64,
}

/// Welford accumulator for mean and covariance.
struct RunningMoments {
    count: f64,
    mean: Vec<f64>,
    m2: Matrix,
}

impl RunningMoments {
    fn new(d: usize) -> Self {
        Self { count: 0.0, mean: vec![0.0; d], m2: Matrix::zeros(d, d) }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        let d = x.len();
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / self.count;
        }
        for i in 0..d {
            for j in 0..d {
                self.m2[(i, j)] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    fn covariance(&self) -> Matrix {
        let d = self.mean.len();
        let mut c = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                c[(i, j)] = 0.5 * (self.m2[(i, j)] + self.m2[(j, i)]) / (self.count - 1.0);
            }
            c[(i, i)] += 1e-8;
        }
        c
    }
}

const ADAPT_START: usize = 100;
const ADAPT_EVERY: usize = 50;

/// Random-walk Metropolis with burn-in-only adaptation.
pub fn run_metropolis<F, R>(
    log_target: F,
    initial: Vec<f64>,
    settings: &MetropolisSettings,
    rng: &mut R,
) -> Result<MetropolisChain>
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let d = initial.len();
    if d == 0 {
        return Err(Error::InvalidConfig("empty state"));
    }
    let mut x = initial;
    let mut lx = log_target(&x);
    if !lx.is_finite() {
        return Err(Error::NonFiniteKernel(alloc::format!("initial state {x:?}")));
    }
    let mut chol = Matrix::identity(d);
    let mut ln_lambda = log(settings.proposal_scale.max(f64::MIN_POSITIVE));
    if settings.proposal_scale == 0.0 {
        ln_lambda = f64::NEG_INFINITY;
    }
    let mut moments = RunningMoments::new(d);
    let mut states = Vec::with_capacity(settings.iterations.saturating_sub(settings.burn_in) / settings.thin + 1);
    let mut accepted_after = 0usize;
    let mut z = vec![0.0; d];
    let mut y = vec![0.0; d];
    for it in 0..settings.iterations {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
        let lambda = exp(ln_lambda);
        for (i, yi) in y.iter_mut().enumerate() {
            let step: f64 = (0..=i).map(|j| chol[(i, j)] * z[j]).sum();
            *yi = x[i] + lambda * step;
        }
        let ly = log_target(&y);
        let log_u: f64 = log(rng.random::<f64>());
        let accept = ly.is_finite() && (ly >= lx || log_u < ly - lx);
        if accept {
            x.copy_from_slice(&y);
            lx = ly;
        }
        if it < settings.burn_in {
            if settings.adapt && settings.proposal_scale > 0.0 {
                let rate = if accept { 1.0 } else { 0.0 };
                ln_lambda += (rate - settings.target_acceptance) / libm::pow((it + 1) as f64, 0.6);
                moments.push(&x);
                if it >= ADAPT_START && it % ADAPT_EVERY == 0 {
                    if let Ok(l) = cholesky(&moments.covariance()) {
                        // Re-express λ so the first covariance update keeps the step size.
                        if chol == Matrix::identity(d) {
                            let scale = sqrt((0..d).map(|i| l[(i, i)] * l[(i, i)]).sum::<f64>() / d as f64);
                            if scale > 0.0 {
                                ln_lambda -= log(scale);
                            }
                        }
                        chol = l;
                    }
                }
            }
        } else {
            if accept {
                accepted_after += 1;
            }
            if (it - settings.burn_in) % settings.thin == 0 {
                states.push(x.clone());
            }
        }
    }
    let retained_iters = settings.iterations.saturating_sub(settings.burn_in).max(1);
    Ok(MetropolisChain { states, acceptance_rate: accepted_after as f64 / retained_iters as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub s: Vec<f64>,
    pub r: Vec<f64>,
    /// One row per draw.
    pub beta: Vec<Vec<f64>>,
    /// One row per draw, `k` columns.
    pub p: Vec<Vec<f64>>,
    pub group_sizes: Vec<u32>,
    pub acceptance_rate: f64,
    pub ess_s: f64,
    pub ess_beta: Vec<f64>,
    pub ess_p: Vec<f64>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn column(&self, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..self.len()).map(f).collect()
    }
}

/// `ln` of a `Gamma(a, 1)` draw, accurate for tiny shapes.
fn ln_gamma_draw<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a >= 1.0 {
        let g = Gamma::new(a, 1.0).expect("positive shape");
        log(g.sample(rng))
    } else {
        // Ga(a) = Ga(a + 1) U^(1/a).
        let g = Gamma::new(a + 1.0, 1.0).expect("positive shape");
        let u: f64 = rng.random::<f64>();
        log(g.sample(rng)) + log(u.max(f64::MIN_POSITIVE)) / a
    }
}

/// A `Beta(a, b)` draw clamped into the open unit interval.
pub fn beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let la = ln_gamma_draw(a, rng);
    let lb = ln_gamma_draw(b, rng);
    let p = exp(la - ln_add_exp(la, lb));
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

fn gate(data: &Dataset, hp: &HyperPriorSpec, cfg: &SamplerConfig) -> Result<()> {
    let verdict = decide(data, hp, cfg.mode)?;
    let refuse = match verdict.status {
        Status::Proper => false,
        Status::Unknown => !cfg.allow_unknown,
        Status::Improper => true,
    };
    if refuse {
        let condition = verdict.failed_condition().map_or_else(|| verdict.describe(), |c| c.to_string());
        return Err(Error::SamplingRefused { status: verdict.status, condition });
    }
    Ok(())
}

/// Samples the joint posterior after checking propriety.
pub fn sample_posterior(data: &Dataset, hp: &HyperPriorSpec, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    gate(data, hp, cfg)?;
    let kernel = LogKernel::new(data, hp)?;
    let m = data.m();
    let beta0 = match &cfg.initial_beta {
        Some(b) if b.len() != m => return Err(Error::DimensionMismatch { expected: m, found: b.len() }),
        Some(b) => b.clone(),
        None => vec![0.0; m],
    };
    let mut initial = vec![cfg.initial_s];
    initial.extend_from_slice(&beta0);
    let settings = MetropolisSettings {
        iterations: cfg.burn_in + cfg.draws * cfg.thin,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        adapt: cfg.adapt,
        target_acceptance: cfg.target_acceptance,
        proposal_scale: cfg.proposal_scale,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let chain = run_metropolis(|v: &[f64]| kernel.at_s_with_jacobian(v[0], &v[1..]), initial, &settings, &mut rng)?;

    let design = data.design();
    let mut out = PosteriorDraws {
        s: Vec::with_capacity(chain.states.len()),
        r: Vec::with_capacity(chain.states.len()),
        beta: Vec::with_capacity(chain.states.len()),
        p: Vec::with_capacity(chain.states.len()),
        group_sizes: data.groups().iter().map(|g| g.n()).collect(),
        acceptance_rate: chain.acceptance_rate,
        ess_s: 0.0,
        ess_beta: Vec::new(),
        ess_p: Vec::new(),
    };
    for state in chain.states {
        let s = state[0];
        let r = exp(s);
        let beta = state[1..].to_vec();
        let eta = design.mul_vec(&beta)?;
        let p: Vec<f64> = data
            .groups()
            .iter()
            .zip(&eta)
            .map(|(g, &e)| {
                let a = r * logistic(e) + f64::from(g.y());
                let b = r * logistic(-e) + f64::from(g.n() - g.y());
                beta_draw(a, b, &mut rng)
            })
            .collect();
        out.s.push(s);
        out.r.push(r);
        out.beta.push(beta);
        out.p.push(p);
    }
    out.ess_s = effective_sample_size(&out.s);
    out.ess_beta = (0..m).map(|j| effective_sample_size(&out.column_of_beta(j))).collect();
    out.ess_p = (0..data.k()).map(|j| effective_sample_size(&out.column_of_p(j))).collect();
    Ok(out)
}

impl PosteriorDraws {
    pub fn column_of_beta(&self, j: usize) -> Vec<f64> {
        self.beta.iter().map(|b| b[j]).collect()
    }

    pub fn column_of_p(&self, j: usize) -> Vec<f64> {
        self.p.iter().map(|p| p[j]).collect()
    }
}

/// Effective sample size by Geyer's initial positive sequence.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0 = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return n as f64;
    }
    let autocorr = |lag: usize| -> f64 {
        let c: f64 = x[..n - lag].iter().zip(&x[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum();
        c / n as f64 / c0
    };
    let max_lag = (n - 2).min(5_000);
    let mut sum = 0.0;
    let mut lag = 0;
    while lag < max_lag {
        let pair = if lag == 0 { 1.0 + autocorr(1) } else { autocorr(lag) + autocorr(lag + 1) };
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    // τ = −1 + 2 Σ Γ_k; the lag-0 pair contributes ρ₀ + ρ₁.
    let tau = (2.0 * sum - 1.0).max(1e-12);
    (n as f64 / tau).min(n as f64 * 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: alloc::string::String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
    pub ess: f64,
}

impl ParamSummary {
    /// Monte-Carlo standard error of the mean.
    pub fn mc_se(&self) -> f64 {
        self.sd / sqrt(self.ess.max(1.0))
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean, sd, central 95% interval and ESS of one chain.
pub fn summarize_chain(name: &str, x: &[f64]) -> Result<ParamSummary> {
    if x.is_empty() {
        return Err(Error::InvalidConfig("empty chain"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 { x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ParamSummary {
        name: name.into(),
        mean,
        sd: sqrt(var),
        q025: quantile(&sorted, 0.025),
        q975: quantile(&sorted, 0.975),
        ess: effective_sample_size(x),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawSummary {
    pub draws: usize,
    pub acceptance_rate: f64,
    pub parameters: Vec<ParamSummary>,
    /// Per-group shrinkage `B_j = r / (r + n_j)` averaged over draws.
    pub mean_shrinkage: Vec<f64>,
}

pub fn summarize(draws: &PosteriorDraws) -> Result<DrawSummary> {
    if draws.is_empty() {
        return Err(Error::InvalidConfig("no draws to summarize"));
    }
    let mut parameters = vec![summarize_chain("r", &draws.r)?, summarize_chain("log_r", &draws.s)?];
    let m = draws.beta[0].len();
    for j in 0..m {
        parameters.push(summarize_chain(&alloc::format!("beta{}", j + 1), &draws.column_of_beta(j))?);
    }
    for j in 0..draws.group_sizes.len() {
        parameters.push(summarize_chain(&alloc::format!("p{}", j + 1), &draws.column_of_p(j))?);
    }
    let mean_shrinkage = draws
        .group_sizes
        .iter()
        .map(|&n| draws.r.iter().map(|r| r / (r + f64::from(n))).sum::<f64>() / draws.len() as f64)
        .collect();
    Ok(DrawSummary { draws: draws.len(), acceptance_rate: draws.acceptance_rate, parameters, mean_shrinkage })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_chain_collapses() {
        let s = summarize_chain("c", &[2.5; 100]).unwrap();
        assert_eq!(s.sd, 0.0);
        assert_eq!((s.q025, s.q975), (2.5, 2.5));
        assert_eq!(s.mean, 2.5);
    }

    #[test]
    fn iid_uniform_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let s = summarize_chain("u", &x).unwrap();
        assert!((s.mean - 0.5).abs() < 3.0 * s.mc_se(), "{s:?}");
        assert!(s.ess > 15_000.0 && s.ess < 25_000.0, "{}", s.ess);
    }

    #[test]
    fn ess_of_ar1_is_reduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut v = 0.0;
        let x: Vec<f64> = (0..50_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                v = 0.9 * v + e;
                v
            })
            .collect();
        // Theoretical ESS ratio (1 − φ) / (1 + φ) = 1/19.
        let ess = effective_sample_size(&x);
        assert!(ess > 50_000.0 / 19.0 * 0.7 && ess < 50_000.0 / 19.0 * 1.3, "{ess}");
    }

    #[test]
    fn beta_draw_with_tiny_shape_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = beta_draw(1e-8, 2.0, &mut rng);
            assert!(p > 0.0 && p < 1.0);
            let p = beta_draw(2.0, 1e-8, &mut rng);
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn beta_draw_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 40_000;
        let (a, b) = (0.4, 1.6);
        let x: Vec<f64> = (0..n).map(|_| beta_draw(a, b, &mut rng)).collect();
        let s = summarize_chain("p", &x).unwrap();
        assert!((s.mean - a / (a + b)).abs() < 3.0 * s.mc_se());
    }

    #[test]
    fn config_validation() {
        let cfg = SamplerConfig { draws: 0, ..SamplerConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SamplerConfig { thin: 0, ..SamplerConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
