//! Brute-force propriety adjudication by expanding-domain quadrature.
//!
//! The hyper-posterior is integrated in `(s, β)` with `s = ln r`, so the
//! integrand is the kernel plus the Jacobian `s`. Integrals are taken over
//! nested boxes `[−S_i, S_i] × [−B_i, B_i]^m` with `S_i = S_0 2^i` and
//! `B_i = min(B_0 2^i, B_cap)`. Each level only integrates the new shell, so
//! the level values are non-decreasing by construction.
//!
//! The `β` boxes live in a whitened frame `β = β̂ + L z`, where `β̂` and
//! `L Lᵀ` are the mode and the `β` block of the inverse negative Hessian of
//! the `(s, β)` density. Box half-widths are then in posterior standard
//! deviations, which keeps narrow ridges (strongly collinear covariates)
//! cheap to resolve. When no interior mode exists the frame is the identity.
//!
//! Quadrature alone cannot tell slow convergence from divergence, so the
//! decision also fits tail slopes of the log-integrand along `s → ±∞` and
//! along rays in `β`. A divergence is only declared with a witness: a tail
//! that is not integrable, or shell masses that keep growing.
//!
//! Tail-slope conventions:
//! * `s` directions: slope of the log-integrand in `s`. Integrable at
//!   `s → +∞` iff the slope is negative, at `s → −∞` iff it is positive.
//!   For `dr / r^(u+1)` and `k_y` interior groups the `s → −∞` slope is
//!   `k_y − u`; `density_exponent` gives the same tail per unit `dr`.
//! * `β` rays: slope of the log-integrand against `ln ρ` for `β = β₀ + ρ d`.
//!   Flat tails give a slope near zero; exponential tails a steep one.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, expm1, log};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_inverse, Matrix};
use crate::model::{Dataset, GroupKind, HyperPriorSpec, LogKernel};
use crate::propriety::{decide, ProprietyVerdict, Status, ThresholdMode};
use crate::quadrature::{box_difference, integrate_log_1d, integrate_log_box, integrate_log_box_scaled, QuadConfig};
use crate::special::{ln_add_exp, ln_logistic, ln_sum_exp};

/// Largest covariate dimension the oracle integrates over.
pub const MAX_ORACLE_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Relative shell increment below which the integral counts as converged.
    pub tolerance: f64,
    pub max_levels: usize,
    /// `S_0`, half-width of the first box in `s = ln r`.
    pub base_s: f64,
    /// `B_0`, half-width of the first box in each `β` coordinate.
    pub base_beta: f64,
    /// Cap on `|x_j · β|` over the integration box.
    pub beta_cap: f64,
    /// Per-axis quadrature settings; `rel_tol` defaults to `tolerance / 10`.
    pub quad: QuadConfig,
    pub s_radii: Vec<f64>,
    pub beta_radii: Vec<f64>,
    /// Half-width of the band around an integrability threshold inside
    /// which a tail is reported as ambiguous.
    pub slope_margin: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self::with_tolerance(1e-4)
    }
}

impl OracleConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            max_levels: 8,
            base_s: 4.0,
            base_beta: 8.0,
            beta_cap: 80.0,
            quad: QuadConfig { rel_tol: tolerance / 10.0, initial_pieces: 4, ..QuadConfig::default() },
            s_radii: vec![16.0, 32.0, 64.0, 128.0],
            beta_radii: vec![25.0, 50.0, 100.0, 200.0, 400.0],
            slope_margin: 0.05,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidConfig("tolerance must lie in (0, 1)"));
        }
        if self.max_levels < 3 {
            return Err(Error::InvalidConfig("at least three levels are needed"));
        }
        if !(self.base_s > 0.0 && self.base_beta > 0.0 && self.beta_cap > 0.0) {
            return Err(Error::InvalidConfig("box sizes must be positive"));
        }
        check_radii(&self.s_radii)?;
        check_radii(&self.beta_radii)
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < 4 {
        return Err(Error::InvalidConfig("tail fits need at least four radii"));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidConfig("radii must be positive"));
    }
    let ratio = radii[1] / radii[0];
    if !(ratio > 1.0) || radii.windows(2).any(|w| ((w[1] / w[0]) / ratio - 1.0).abs() > 1e-9) {
        return Err(Error::InvalidConfig("radii must be geometric and increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleLevel {
    pub s_half_width: f64,
    pub beta_half_width: f64,
    pub log_integral: f64,
    /// `ln` of the mass added by this level's shell.
    pub log_shell_mass: Option<f64>,
    /// Shell mass divided by the level's total.
    pub relative_increment: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Finite,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "unit", rename_all = "kebab-case")]
pub enum Direction {
    /// `s = ln r → +∞`.
    LogRUp,
    /// `s = ln r → −∞`.
    LogRDown,
    /// `β = β₀ + ρ d`, `ρ → ∞`, with unit vector `d`.
    Beta(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailClass {
    Integrable,
    NonIntegrable,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSlope {
    pub direction: Direction,
    pub radii: Vec<f64>,
    pub log_values: Vec<f64>,
    pub slope: f64,
    pub class: TailClass,
}

impl TailSlope {
    /// For `s` directions, the slope of the density per unit `dr`
    /// (the `s` slope minus the Jacobian's 1). `None` for `β` rays.
    pub fn density_exponent(&self) -> Option<f64> {
        match self.direction {
            Direction::LogRUp | Direction::LogRDown => Some(self.slope - 1.0),
            Direction::Beta(_) => None,
        }
    }

    pub fn min_log_value(&self) -> f64 {
        self.log_values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// A tail whose fitted slope is on the non-integrable side.
    Tail { direction: Direction, slope: f64, min_log_value: f64 },
    /// Three consecutive shells whose masses did not shrink.
    Increments { first_level: usize, log_shell_masses: Vec<f64> },
}

/// Conditional `r`-integral at fixed `β`, divided by the `β`-only factor of
/// the likelihood's upper bound (`g(β) ∏ C(n_j, y_j) ∏ pE qE` over interior
/// groups, times `pE` or `qE` per extreme group). When every interior group has
/// two trials this is exactly `∫ f(r) (r / (1 + r))^{k_y} dr` for extreme-free data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RPart {
    pub beta: Vec<f64>,
    pub log_value: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub levels: Vec<OracleLevel>,
    pub decision: Decision,
    pub tail_slopes: Vec<TailSlope>,
    pub divergence_witness: Option<Witness>,
    /// Highest-density grid point of the base box, origin of the tail probes.
    pub origin_s: f64,
    pub origin_beta: Vec<f64>,
    /// Frame in which the `β` half-widths of `levels` are measured.
    pub frame: BetaFrame,
    pub r_part: Option<RPart>,
    pub evaluations: usize,
}

impl OracleReport {
    pub fn log_integral(&self) -> f64 {
        self.levels.last().map_or(f64::NEG_INFINITY, |l| l.log_integral)
    }
}

fn check_dim(data: &Dataset) -> Result<()> {
    if data.m() > MAX_ORACLE_DIM {
        Err(Error::OracleDimension(data.m()))
    } else {
        Ok(())
    }
}

/// Affine frame `β = center + factor · z` with lower-triangular `factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaFrame {
    pub center: Vec<f64>,
    pub factor: Matrix,
    pub whitened: bool,
}

impl BetaFrame {
    pub fn identity(m: usize) -> Self {
        Self { center: vec![0.0; m], factor: Matrix::identity(m), whitened: false }
    }

    fn ln_det(&self) -> f64 {
        (0..self.center.len()).map(|i| log(self.factor[(i, i)])).sum()
    }

    #[inline]
    fn map_into(&self, z: &[f64], beta: &mut [f64]) {
        for (i, b) in beta.iter_mut().enumerate() {
            *b = self.center[i] + (0..=i).map(|j| self.factor[(i, j)] * z[j]).sum::<f64>();
        }
    }

    /// Largest half-width `b` with `|x_j · β| ≤ cap` on the whole `z` box.
    fn half_width_cap(&self, data: &Dataset, cap: f64, fallback: f64) -> f64 {
        let m = self.center.len();
        let mut best = f64::INFINITY;
        for g in data.groups() {
            let x = g.x();
            let at_center: f64 = x.iter().zip(&self.center).map(|(a, b)| a * b).sum();
            let spread: f64 = (0..m).map(|l| (l..m).map(|i| x[i] * self.factor[(i, l)]).sum::<f64>().abs()).sum();
            if spread > 0.0 {
                best = best.min((cap - at_center.abs()) / spread);
            }
        }
        if best.is_finite() && best > 0.0 {
            best
        } else {
            fallback
        }
    }
}

fn fd_derivatives<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> (f64, Vec<f64>, Matrix) {
    let d = x.len();
    let f0 = f(x);
    let mut grad = vec![0.0; d];
    let mut hess = Matrix::zeros(d, d);
    let mut p = x.to_vec();
    for i in 0..d {
        p[i] = x[i] + h;
        let fp = f(&p);
        p[i] = x[i] - h;
        let fm = f(&p);
        p[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut q = |di: f64, dj: f64| {
                p[i] = x[i] + di;
                p[j] = x[j] + dj;
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (q(h, h) - q(h, -h) - q(-h, h) + q(-h, -h)) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    (f0, grad, hess)
}

fn negated(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out[(i, j)] = -m[(i, j)];
        }
    }
    out
}

/// Damped Newton ascent on the `(s, β)` density. Returns the mode and the
/// inverse negative Hessian there, or `None` when no interior mode is found.
fn find_mode<F: Fn(&[f64]) -> f64>(f: &F, start: &[f64]) -> Option<(Vec<f64>, Matrix)> {
    const H: f64 = 1e-3;
    const RUNAWAY: f64 = 1e3;
    let d = start.len();
    let mut x = start.to_vec();
    for _ in 0..200 {
        let (f0, grad, hess) = fd_derivatives(f, &x, H);
        let step = match spd_inverse(&negated(&hess)) {
            Ok(inv) => (0..d).map(|i| (0..d).map(|j| inv[(i, j)] * grad[j]).sum()).collect::<Vec<f64>>(),
            Err(_) => {
                let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>()).max(1e-300);
                grad.iter().map(|g| g / norm).collect()
            }
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let y: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            if f(&y) >= f0 - 1e-12 {
                moved = true;
                let size = step.iter().map(|v| (t * v).abs()).fold(0.0, f64::max);
                x = y;
                if size < 1e-8 {
                    let (_, _, hess) = fd_derivatives(f, &x, H);
                    return spd_inverse(&negated(&hess)).ok().map(|inv| (x, inv));
                }
                break;
            }
            t *= 0.5;
        }
        if !moved || x.iter().any(|v| !(v.abs() < RUNAWAY)) {
            return None;
        }
    }
    None
}

fn build_frame(kernel: &LogKernel<'_>, m: usize, start_s: f64, start_beta: &[f64]) -> (Option<f64>, BetaFrame) {
    let f = |v: &[f64]| kernel.at_s_with_jacobian(v[0], &v[1..]);
    let mut start = vec![start_s];
    start.extend_from_slice(start_beta);
    let Some((mode, cov)) = find_mode(&f, &start) else {
        return (None, BetaFrame::identity(m));
    };
    let mut block = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            block[(i, j)] = cov[(i + 1, j + 1)];
        }
    }
    match cholesky(&block) {
        Ok(factor) => (Some(mode[0]), BetaFrame { center: mode[1..].to_vec(), factor, whitened: true }),
        Err(_) => (None, BetaFrame::identity(m)),
    }
}

fn level_box(m: usize, s: f64, b: f64) -> Vec<(f64, f64)> {
    let mut bx = vec![(-s, s)];
    bx.extend(core::iter::repeat_n((-b, b), m));
    bx
}

struct Expansion {
    levels: Vec<OracleLevel>,
    evaluations: usize,
}

/// Integrates `log_f` over the nested boxes, stopping early once two
/// consecutive relative increments fall below the tolerance when `stop_early`.
fn integrate_expanding<F>(
    log_f: F,
    m: usize,
    beta_cap: f64,
    cfg: &OracleConfig,
    stop_early: bool,
    levels: usize,
) -> Result<Expansion>
where
    F: Fn(&[f64]) -> f64,
{
    let mut out: Vec<OracleLevel> = Vec::with_capacity(levels);
    let mut evaluations = 0;
    let mut prev_box: Option<Vec<(f64, f64)>> = None;
    for i in 0..levels {
        let scale = (1u64 << i) as f64;
        let s = cfg.base_s * scale;
        let b = (cfg.base_beta * scale).min(beta_cap);
        let bx = level_box(m, s, b);
        let pieces = match &prev_box {
            None => vec![bx.clone()],
            Some(p) => box_difference(p, &bx),
        };
        let reference = out.last().map(|l| l.log_integral).filter(|v| v.is_finite());
        let mut logs = Vec::with_capacity(pieces.len());
        for piece in &pieces {
            let r = integrate_log_box_scaled(&log_f, piece, &cfg.quad, reference)?;
            evaluations += r.evaluations;
            logs.push(r.log_value);
        }
        let shell = ln_sum_exp(&logs);
        let level = match out.last() {
            None => OracleLevel {
                s_half_width: s,
                beta_half_width: b,
                log_integral: shell,
                log_shell_mass: None,
                relative_increment: None,
            },
            Some(last) => {
                let total = ln_add_exp(last.log_integral, shell);
                let rel = if total == f64::NEG_INFINITY { 0.0 } else { -expm1(last.log_integral - total) };
                OracleLevel {
                    s_half_width: s,
                    beta_half_width: b,
                    log_integral: total,
                    log_shell_mass: Some(shell),
                    relative_increment: Some(rel),
                }
            }
        };
        out.push(level);
        prev_box = Some(bx);
        if stop_early && converged(&out, cfg.tolerance) {
            break;
        }
    }
    Ok(Expansion { levels: out, evaluations })
}

fn converged(levels: &[OracleLevel], tol: f64) -> bool {
    let n = levels.len();
    n >= 3 && levels[n - 2..].iter().all(|l| l.relative_increment.is_some_and(|r| r < tol))
}

fn increments_witness(levels: &[OracleLevel], tol: f64) -> Option<Witness> {
    let shells: Vec<(usize, f64, f64)> =
        levels.iter().enumerate().filter_map(|(i, l)| Some((i, l.log_shell_mass?, l.relative_increment?))).collect();
    shells.windows(3).find_map(|w| {
        let growing = w[1].1 >= w[0].1 && w[2].1 >= w[1].1;
        let material = w.iter().all(|x| x.2 >= tol);
        (growing && material)
            .then(|| Witness::Increments { first_level: w[0].0, log_shell_masses: w.iter().map(|x| x.1).collect() })
    })
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Offsets in `s` over which `β`-ray values are maximized.
const PROFILE_OFFSETS: [f64; 5] = [-6.0, -3.0, 0.0, 3.0, 6.0];

fn beta_profile(kernel: &LogKernel<'_>, s0: f64, beta: &[f64]) -> f64 {
    PROFILE_OFFSETS.iter().map(|ds| kernel.at_s_with_jacobian(s0 + ds, beta)).fold(f64::NEG_INFINITY, f64::max)
}

fn ray_point(origin: &[f64], dir: &[f64], rho: f64) -> Vec<f64> {
    origin.iter().zip(dir).map(|(o, d)| o + rho * d).collect()
}

fn fit_tail(
    kernel: &LogKernel<'_>,
    s0: f64,
    beta0: &[f64],
    direction: &Direction,
    radii: &[f64],
    margin: f64,
) -> Result<TailSlope> {
    const ZERO_BAND: f64 = 1e-3;
    let m = beta0.len();
    let (xs, values): (Vec<f64>, Vec<f64>) = match direction {
        Direction::LogRUp | Direction::LogRDown => {
            let sign = if matches!(direction, Direction::LogRUp) { 1.0 } else { -1.0 };
            radii
                .iter()
                .map(|rho| {
                    let s = s0 + sign * rho;
                    (s, kernel.at_s_with_jacobian(s, beta0))
                })
                .unzip()
        }
        Direction::Beta(d) => {
            if d.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: d.len() });
            }
            radii.iter().map(|&rho| (log(rho), beta_profile(kernel, s0, &ray_point(beta0, d, rho)))).unzip()
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteKernel(alloc::format!("tail probe along {direction:?}")));
    }
    let slope = least_squares_slope(&xs, &values);
    let class = match direction {
        Direction::LogRUp => classify_band(-slope, margin, ZERO_BAND),
        Direction::LogRDown => classify_band(slope, margin, ZERO_BAND),
        Direction::Beta(_) => {
            if slope <= -(m as f64 + 1.0) {
                TailClass::Integrable
            } else if slope >= -0.5 {
                TailClass::NonIntegrable
            } else {
                TailClass::Ambiguous
            }
        }
    };
    Ok(TailSlope { direction: direction.clone(), radii: radii.to_vec(), log_values: values, slope, class })
}

/// `decay` is positive for an integrable tail.
fn classify_band(decay: f64, margin: f64, zero_band: f64) -> TailClass {
    if decay > margin {
        TailClass::Integrable
    } else if decay < zero_band {
        TailClass::NonIntegrable
    } else {
        TailClass::Ambiguous
    }
}

/// Fitted tail slope of the `(s, β)` integrand, probing from `s = 0`, `β = 0`.
pub fn tail_slope(data: &Dataset, hp: &HyperPriorSpec, direction: &Direction, radii: &[f64]) -> Result<TailSlope> {
    check_radii(radii)?;
    let kernel = LogKernel::new(data, hp)?;
    let zero = vec![0.0; data.m()];
    fit_tail(&kernel, 0.0, &zero, direction, radii, OracleConfig::default().slope_margin)
}

fn grid_origin(kernel: &LogKernel<'_>, m: usize, s_half: f64, b_half: f64) -> (f64, Vec<f64>) {
    const N: usize = 17;
    let node = |h: f64, i: usize| -h + 2.0 * h * i as f64 / (N - 1) as f64;
    let mut best = (f64::NEG_INFINITY, 0.0, vec![0.0; m]);
    let mut beta = vec![0.0; m];
    let total = N.pow(m as u32);
    for si in 0..N {
        let s = node(s_half, si);
        for flat in 0..total {
            let mut idx = flat;
            for b in beta.iter_mut() {
                *b = node(b_half, idx % N);
                idx /= N;
            }
            let v = kernel.at_s_with_jacobian(s, &beta);
            if v > best.0 {
                best = (v, s, beta.clone());
            }
        }
    }
    (best.1, best.2)
}

/// Unit direction in the `β` plane whose far-field density is largest.
fn worst_planar_direction(
    kernel: &LogKernel<'_>,
    s0: f64,
    beta0: &[f64],
    scan_radius: f64,
    refine_radius: f64,
) -> Vec<f64> {
    const STEPS: usize = 720;
    let unit = |theta: f64| [libm::cos(theta), libm::sin(theta)];
    let value = |theta: f64, rho: f64| beta_profile(kernel, s0, &ray_point(beta0, &unit(theta), rho));
    let step = 2.0 * core::f64::consts::PI / STEPS as f64;
    let (mut best_theta, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..STEPS {
        let theta = i as f64 * step;
        let v = value(theta, scan_radius);
        if v > best {
            best = v;
            best_theta = theta;
        }
    }
    // Golden-section refinement at the far radius.
    let (mut a, mut b) = (best_theta - 2.0 * step, best_theta + 2.0 * step);
    let g = 0.618_033_988_749_894_9;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (value(c, refine_radius), value(d, refine_radius));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = value(c, refine_radius);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = value(d, refine_radius);
        }
    }
    let theta = 0.5 * (a + b);
    let v = value(theta, refine_radius);
    let coarse = value(best_theta, refine_radius);
    unit(if v >= coarse { theta } else { best_theta }).to_vec()
}

fn probe_directions(kernel: &LogKernel<'_>, s0: f64, beta0: &[f64], cfg: &OracleConfig) -> Vec<Direction> {
    let mut dirs = vec![Direction::LogRUp, Direction::LogRDown];
    match beta0.len() {
        1 => {
            dirs.push(Direction::Beta(vec![1.0]));
            dirs.push(Direction::Beta(vec![-1.0]));
        }
        2 => {
            let h = core::f64::consts::FRAC_1_SQRT_2;
            for d in [[1.0, 0.0], [h, h], [0.0, 1.0], [-h, h], [-1.0, 0.0], [-h, -h], [0.0, -1.0], [h, -h]] {
                dirs.push(Direction::Beta(d.to_vec()));
            }
            let scan = cfg.beta_radii[cfg.beta_radii.len() / 2];
            let far = *cfg.beta_radii.last().expect("validated");
            dirs.push(Direction::Beta(worst_planar_direction(kernel, s0, beta0, scan, far)));
        }
        _ => {}
    }
    dirs
}

/// `ln` of the `β`-only factor of the likelihood's upper bound, plus `ln g(β)`
/// and the binomial terms.
fn beta_factor(kernel: &LogKernel<'_>, beta: &[f64]) -> f64 {
    let data = kernel.data();
    let mut acc = kernel.hyper_prior().g.ln_density(beta) + crate::model::log_binomial_terms(data);
    for g in data.groups() {
        let eta: f64 = g.x().iter().zip(beta).map(|(x, b)| x * b).sum();
        acc += match g.kind() {
            GroupKind::Interior => ln_logistic(eta) + ln_logistic(-eta),
            GroupKind::ExtremeSuccess => ln_logistic(eta),
            GroupKind::ExtremeFailure => ln_logistic(-eta),
        };
    }
    acc
}

fn compute_r_part(kernel: &LogKernel<'_>, beta: &[f64], cfg: &OracleConfig) -> Result<RPart> {
    let offset = beta_factor(kernel, beta);
    let f = |s: f64| Ok(kernel.at_s_with_jacobian(s, beta) - offset);
    let mut total = integrate_log_1d(f, -cfg.base_s, cfg.base_s, &cfg.quad)?.log_value;
    let mut converged_levels = 0;
    for i in 1..cfg.max_levels {
        let lo = cfg.base_s * (1u64 << (i - 1)) as f64;
        let hi = 2.0 * lo;
        let left = integrate_log_1d(f, -hi, -lo, &cfg.quad)?.log_value;
        let right = integrate_log_1d(f, lo, hi, &cfg.quad)?.log_value;
        let shell = ln_add_exp(left, right);
        let next = ln_add_exp(total, shell);
        let rel = -expm1(total - next);
        total = next;
        converged_levels = if rel < cfg.tolerance { converged_levels + 1 } else { 0 };
        if converged_levels >= 2 {
            break;
        }
    }
    Ok(RPart { beta: beta.to_vec(), log_value: total, converged: converged_levels >= 2 })
}

/// `(s, z)` density in the frame, including the frame's Jacobian.
fn framed_density<'k>(kernel: &'k LogKernel<'_>, frame: &'k BetaFrame) -> impl Fn(&[f64]) -> f64 + 'k {
    let m = frame.center.len();
    let ln_det = frame.ln_det();
    move |v: &[f64]| {
        let mut beta = [0.0; MAX_ORACLE_DIM];
        frame.map_into(&v[1..], &mut beta[..m]);
        kernel.at_s_with_jacobian(v[0], &beta[..m]) + ln_det
    }
}

/// Expanding-domain integration of the hyper-posterior with a decision.
pub fn integrate_posterior(data: &Dataset, hp: &HyperPriorSpec, cfg: &OracleConfig) -> Result<OracleReport> {
    check_dim(data)?;
    cfg.validate()?;
    let kernel = LogKernel::new(data, hp)?;
    let m = data.m();
    let identity_cap = BetaFrame::identity(m).half_width_cap(data, cfg.beta_cap, cfg.beta_cap);
    let (grid_s, grid_beta) = grid_origin(&kernel, m, cfg.base_s, cfg.base_beta.min(identity_cap));
    let (mode_s, frame) = build_frame(&kernel, m, grid_s, &grid_beta);
    let (s0, beta0) = match mode_s {
        Some(s) => (s, frame.center.clone()),
        None => (grid_s, grid_beta),
    };
    let cap = frame.half_width_cap(data, cfg.beta_cap, cfg.base_beta);
    let expansion = integrate_expanding(framed_density(&kernel, &frame), m, cap, cfg, true, cfg.max_levels)?;
    let mut tail_slopes = Vec::new();
    for dir in probe_directions(&kernel, s0, &beta0, cfg) {
        let radii = match dir {
            Direction::Beta(_) => &cfg.beta_radii,
            _ => &cfg.s_radii,
        };
        tail_slopes.push(fit_tail(&kernel, s0, &beta0, &dir, radii, cfg.slope_margin)?);
    }

    let non_integrable = tail_slopes
        .iter()
        .filter(|t| t.class == TailClass::NonIntegrable)
        .max_by(|a, b| a.min_log_value().total_cmp(&b.min_log_value()));
    let ambiguous = tail_slopes.iter().any(|t| t.class == TailClass::Ambiguous);
    let (decision, witness) = if let Some(t) = non_integrable {
        let w = Witness::Tail { direction: t.direction.clone(), slope: t.slope, min_log_value: t.min_log_value() };
        (Decision::Divergent, Some(w))
    } else if converged(&expansion.levels, cfg.tolerance) && !ambiguous {
        (Decision::Finite, None)
    } else if let Some(w) = increments_witness(&expansion.levels, cfg.tolerance) {
        (Decision::Divergent, Some(w))
    } else {
        (Decision::Inconclusive, None)
    };

    let r_part = if decision == Decision::Divergent { None } else { Some(compute_r_part(&kernel, &beta0, cfg)?) };

    Ok(OracleReport {
        levels: expansion.levels,
        decision,
        tail_slopes,
        divergence_witness: witness,
        origin_s: s0,
        origin_beta: beta0,
        frame,
        r_part,
        evaluations: expansion.evaluations,
    })
}

/// Posterior expectation of a positive function `h(r, β)`, given as
/// `ln h(s, β)` with `s = ln r`: the ratio of two expanding-box integrals
/// over identical boxes.
pub fn posterior_expectation<H>(data: &Dataset, hp: &HyperPriorSpec, cfg: &OracleConfig, ln_h: H) -> Result<f64>
where
    H: Fn(f64, &[f64]) -> f64,
{
    check_dim(data)?;
    cfg.validate()?;
    let kernel = LogKernel::new(data, hp)?;
    let m = data.m();
    let identity = BetaFrame::identity(m);
    let (grid_s, grid_beta) = grid_origin(
        &kernel,
        m,
        cfg.base_s,
        cfg.base_beta.min(identity.half_width_cap(data, cfg.beta_cap, cfg.beta_cap)),
    );
    let (_, frame) = build_frame(&kernel, m, grid_s, &grid_beta);
    let cap = frame.half_width_cap(data, cfg.beta_cap, cfg.base_beta);
    let den = integrate_expanding(framed_density(&kernel, &frame), m, cap, cfg, true, cfg.max_levels)?;
    if !converged(&den.levels, cfg.tolerance) {
        return Err(Error::InvalidConfig("normalizing integral did not converge"));
    }
    let ln_det = frame.ln_det();
    let num = integrate_expanding(
        |v: &[f64]| {
            let mut beta = [0.0; MAX_ORACLE_DIM];
            frame.map_into(&v[1..], &mut beta[..m]);
            kernel.at_s_with_jacobian(v[0], &beta[..m]) + ln_h(v[0], &beta[..m]) + ln_det
        },
        m,
        cap,
        cfg,
        false,
        den.levels.len(),
    )?;
    let ln_num = num.levels.last().expect("non-empty").log_integral;
    let ln_den = den.levels.last().expect("non-empty").log_integral;
    Ok(exp(ln_num - ln_den))
}

/// `ln ∫_1^R ∫ exp(kernel) dβ dr` for each upper limit `R` (increasing, > 1),
/// with `β` integrated over the capped box.
pub fn partial_r_integrals(
    data: &Dataset,
    hp: &HyperPriorSpec,
    upper_limits: &[f64],
    cfg: &OracleConfig,
) -> Result<Vec<f64>> {
    check_dim(data)?;
    if upper_limits.is_empty() || upper_limits[0] <= 1.0 || upper_limits.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("upper limits must increase from above 1"));
    }
    let kernel = LogKernel::new(data, hp)?;
    let cap = BetaFrame::identity(data.m()).half_width_cap(data, cfg.beta_cap, cfg.beta_cap);
    let log_f = |v: &[f64]| kernel.at_s_with_jacobian(v[0], &v[1..]);
    let mut out = Vec::with_capacity(upper_limits.len());
    let mut lo = 0.0;
    let mut acc = f64::NEG_INFINITY;
    for &r in upper_limits {
        let hi = log(r);
        let mut bx = vec![(lo, hi)];
        bx.extend(core::iter::repeat_n((-cap, cap), data.m()));
        acc = ln_add_exp(acc, integrate_log_box(log_f, &bx, &cfg.quad)?.log_value);
        out.push(acc);
        lo = hi;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Agreement {
    Agree,
    Disagree,
    /// Oracle inconclusive or analytic verdict unknown.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub literal: ProprietyVerdict,
    pub corrected: ProprietyVerdict,
    pub oracle: OracleReport,
    /// Agreement between the corrected-threshold verdict and the oracle.
    pub agreement: Agreement,
    /// The literal-threshold verdict agrees with the oracle.
    pub literal_agrees: bool,
}

fn agreement(status: Status, decision: Decision) -> Agreement {
    match (status, decision) {
        (Status::Unknown, _) | (_, Decision::Inconclusive) => Agreement::Undetermined,
        (Status::Proper, Decision::Finite) | (Status::Improper, Decision::Divergent) => Agreement::Agree,
        _ => Agreement::Disagree,
    }
}

/// Runs both analytic threshold modes and the oracle on the same input.
pub fn cross_validate(data: &Dataset, hp: &HyperPriorSpec, cfg: &OracleConfig) -> Result<CrossValidation> {
    let literal = decide(data, hp, ThresholdMode::Literal)?;
    let corrected = decide(data, hp, ThresholdMode::Corrected)?;
    let oracle = integrate_posterior(data, hp, cfg)?;
    let agreement_c = agreement(corrected.status, oracle.decision);
    let literal_agrees = agreement(literal.status, oracle.decision) == Agreement::Agree;
    Ok(CrossValidation { literal, corrected, oracle, agreement: agreement_c, literal_agrees })
}
