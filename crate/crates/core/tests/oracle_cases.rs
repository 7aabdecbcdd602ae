use std::f64::consts::PI;

use bbl_core::oracle::{
    cross_validate, integrate_posterior, partial_r_integrals, posterior_expectation, tail_slope, Agreement, Decision,
    Direction, OracleConfig, TailClass, Witness,
};
use bbl_core::quadrature::{integrate_log_1d, QuadConfig};
use bbl_core::special::ln_logistic;
use bbl_core::{BetaPrior, Dataset, Error, Group, HyperPriorSpec, RPrior, Status};

fn hp(f: RPrior, g: BetaPrior) -> HyperPriorSpec {
    HyperPriorSpec::new(f, g).unwrap()
}

fn power(t: f64, u: f64) -> RPrior {
    RPrior::PowerLaw { t, u }
}

fn hospitals(y: [u32; 5], emr: [f64; 5]) -> Dataset {
    let n = [54, 75, 93, 104, 105];
    Dataset::new((0..5).map(|j| Group::new(n[j], y[j], vec![1.0, emr[j]]).unwrap()).collect()).unwrap()
}

#[test]
fn interior_coins_are_finite() {
    let d = Dataset::intercept_only(&[(2, 1), (2, 1)]).unwrap();
    let rep = integrate_posterior(&d, &hp(power(1.0, 1.0), BetaPrior::Flat), &OracleConfig::default()).unwrap();
    assert_eq!(rep.decision, Decision::Finite);
    assert!(rep.divergence_witness.is_none());
    let n = rep.levels.len();
    assert!(rep.levels[n - 2..].iter().all(|l| l.relative_increment.unwrap() < 1e-4));
}

#[test]
fn level_integrals_never_decrease() {
    let d = Dataset::intercept_only(&[(2, 0), (2, 1)]).unwrap();
    for g in [BetaPrior::Flat, BetaPrior::StandardLogisticIntercept] {
        let rep = integrate_posterior(&d, &hp(power(0.0, 1.0), g), &OracleConfig::default()).unwrap();
        for w in rep.levels.windows(2) {
            assert!(w[1].log_integral >= w[0].log_integral);
        }
    }
}

#[test]
fn single_extreme_group_with_flat_prior_diverges_along_beta() {
    let d = Dataset::intercept_only(&[(2, 2)]).unwrap();
    let rep = integrate_posterior(&d, &hp(power(1.0, 1.0), BetaPrior::Flat), &OracleConfig::default()).unwrap();
    assert_eq!(rep.decision, Decision::Divergent);
    match rep.divergence_witness {
        Some(Witness::Tail { direction: Direction::Beta(d), slope, min_log_value }) => {
            assert_eq!(d, vec![1.0]);
            assert!(slope.abs() < 1e-6);
            assert!(min_log_value > -10.0);
        }
        other => panic!("unexpected witness {other:?}"),
    }
}

#[test]
fn single_interior_group_r_part_is_pi() {
    let d = Dataset::intercept_only(&[(2, 1)]).unwrap();
    let h = hp(power(0.0, 0.5), BetaPrior::StandardLogisticIntercept);
    let rep = integrate_posterior(&d, &h, &OracleConfig::with_tolerance(1e-8)).unwrap();
    assert_eq!(rep.decision, Decision::Finite);
    let r_part = rep.r_part.as_ref().unwrap();
    assert!((r_part.log_value.exp() - PI).abs() < 1e-6);
    // The β factor is ∫ 2 p² q² dβ = 1/3 in closed form.
    assert!((rep.log_integral().exp() * 3.0 - PI).abs() < 1e-6);
}

#[test]
fn independent_one_dimensional_r_integral() {
    // ∫ r^(-1/2) / (1 + r) dr in s = ln r: integrand e^(s/2) / (1 + e^s).
    let cfg = QuadConfig { rel_tol: 1e-12, ..QuadConfig::default() };
    let f = |s: f64| Ok(0.5 * s - bbl_core::special::softplus(s));
    let v = integrate_log_1d(f, -90.0, 90.0, &cfg).unwrap();
    assert!((v.log_value.exp() - PI).abs() < 1e-9);
}

#[test]
fn single_interior_group_cross_validation_flags_mode_discrepancy() {
    let d = Dataset::intercept_only(&[(2, 1)]).unwrap();
    let h = hp(power(0.0, 0.5), BetaPrior::StandardLogisticIntercept);
    let cv = cross_validate(&d, &h, &OracleConfig::default()).unwrap();
    assert_eq!(cv.literal.status, Status::Improper);
    assert_eq!(cv.corrected.status, Status::Proper);
    assert!(cv.corrected.discrepancy_flag);
    assert_eq!(cv.agreement, Agreement::Agree);
    assert!(!cv.literal_agrees);
}

#[test]
fn dr_over_r_diverges_and_grows_with_log_r() {
    let d = Dataset::intercept_only(&[(2, 1), (2, 2)]).unwrap();
    let h = hp(RPrior::DrOverR, BetaPrior::StandardLogisticIntercept);
    let rep = integrate_posterior(&d, &h, &OracleConfig::default()).unwrap();
    assert_eq!(rep.decision, Decision::Divergent);
    assert!(matches!(rep.divergence_witness, Some(Witness::Tail { direction: Direction::LogRUp, .. })));

    let limits: Vec<f64> = (2..=6).map(|e| 10f64.powi(e)).collect();
    let partial = partial_r_integrals(&d, &h, &limits, &OracleConfig::default()).unwrap();
    // Large-r likelihood is 2 p³ q; against g = p q and dp = p q dβ the β mass is 2 B(4, 2) = 1/10.
    let c = 0.1;
    let values: Vec<f64> = partial.iter().map(|v| v.exp() / c).collect();
    for w in values.windows(2) {
        assert!(w[1] - w[0] >= 0.9 * 10f64.ln(), "{values:?}");
    }
    let x: Vec<f64> = limits.iter().map(|r| r.ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / 5.0, values.iter().sum::<f64>() / 5.0);
    let slope = x.iter().zip(&values).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>();
    assert!((slope - 1.0).abs() < 0.05, "{slope}");
}

#[test]
fn s_tail_slope_for_power_prior_matches_exponent() {
    let d = Dataset::intercept_only(&[(2, 1), (2, 1)]).unwrap();
    let h = hp(power(0.0, 1.0), BetaPrior::Flat);
    let radii = [16.0, 32.0, 64.0, 128.0];
    let down = tail_slope(&d, &h, &Direction::LogRDown, &radii).unwrap();
    assert!((down.slope - 1.0).abs() < 1e-6, "{down:?}");
    assert_eq!(down.class, TailClass::Integrable);
    let up = tail_slope(&d, &h, &Direction::LogRUp, &radii).unwrap();
    assert!((up.density_exponent().unwrap() + 2.0).abs() < 1e-6);

    let proper = hp(power(1.0, 1.0), BetaPrior::StandardLogisticIntercept);
    let up = tail_slope(&d, &proper, &Direction::LogRUp, &radii).unwrap();
    assert!(up.density_exponent().unwrap() <= -(1.0 + 0.5));
}

#[test]
fn tail_slope_needs_geometric_radii() {
    let d = Dataset::intercept_only(&[(2, 1)]).unwrap();
    let h = hp(power(1.0, 1.0), BetaPrior::Flat);
    assert!(tail_slope(&d, &h, &Direction::LogRUp, &[1.0, 2.0, 4.0]).is_err());
    assert!(tail_slope(&d, &h, &Direction::LogRUp, &[1.0, 2.0, 3.0, 4.0]).is_err());
}

#[test]
fn three_covariates_are_rejected() {
    let d = Dataset::new(vec![Group::new(3, 1, vec![1.0, 0.5, 2.0]).unwrap()]).unwrap();
    let h = hp(power(1.0, 1.0), BetaPrior::Flat);
    assert_eq!(integrate_posterior(&d, &h, &OracleConfig::default()).unwrap_err(), Error::OracleDimension(3));
}

#[test]
fn constant_factor_in_the_prior_shifts_the_log_integral() {
    // A very wide Gaussian differs from the flat prior by its normalizing constant only.
    let d = Dataset::intercept_only(&[(2, 1), (2, 1)]).unwrap();
    let sd = 1e6;
    let wide = bbl_core::GaussianPrior::isotropic(1, sd).unwrap();
    let cfg = OracleConfig::default();
    let flat = integrate_posterior(&d, &hp(power(1.0, 1.0), BetaPrior::Flat), &cfg).unwrap();
    let gauss = integrate_posterior(&d, &hp(power(1.0, 1.0), BetaPrior::Gaussian(wide)), &cfg).unwrap();
    let ln_norm = -(sd * (2.0 * PI).sqrt()).ln();
    assert!((gauss.log_integral() - flat.log_integral() - ln_norm).abs() < 1e-6);
}

#[test]
fn expectation_of_a_probability_lies_in_unit_interval() {
    let d = Dataset::intercept_only(&[(2, 1), (2, 1)]).unwrap();
    let h = hp(power(1.0, 1.0), BetaPrior::StandardLogisticIntercept);
    let mean_pe = posterior_expectation(&d, &h, &OracleConfig::default(), |_, beta| ln_logistic(beta[0])).unwrap();
    // Symmetric data and prior: E[pE] = 1/2.
    assert!((mean_pe - 0.5).abs() < 1e-6, "{mean_pe}");
}

#[test]
fn real_hospitals_are_finite() {
    let d = hospitals([3, 4, 1, 1, 1], [4.30, 2.21, 2.59, 4.73, 3.28]);
    let cv = cross_validate(&d, &hp(power(1.0, 1.0), BetaPrior::Flat), &OracleConfig::default()).unwrap();
    assert_eq!(cv.corrected.status, Status::Proper);
    assert_eq!(cv.oracle.decision, Decision::Finite);
    assert_eq!(cv.agreement, Agreement::Agree);
    assert!(cv.oracle.frame.whitened);
}

/// Shared interior EMR but distinct extreme EMRs: every ray in the rank-deficient
/// direction sends some all-failure group's expected rate to one, so the
/// integral converges even though the interior rank condition fails.
#[test]
fn duplicated_interior_covariates_with_extremes_converge() {
    let d = hospitals([1, 2, 0, 0, 0], [4.30, 4.30, 2.59, 4.73, 3.28]);
    let cv = cross_validate(&d, &hp(power(1.0, 1.0), BetaPrior::Flat), &OracleConfig::default()).unwrap();
    assert_eq!(cv.corrected.status, Status::Improper);
    assert_eq!(cv.oracle.decision, Decision::Finite);
    assert_eq!(cv.agreement, Agreement::Disagree);
}

#[test]
fn single_interior_hospital_with_improper_r_diverges_at_zero() {
    let d = hospitals([1, 0, 0, 0, 0], [4.30, 2.21, 2.59, 4.73, 3.28]);
    let rep = integrate_posterior(&d, &hp(power(0.0, 1.0), BetaPrior::Flat), &OracleConfig::default()).unwrap();
    assert_eq!(rep.decision, Decision::Divergent);
    assert!(matches!(rep.divergence_witness, Some(Witness::Tail { direction: Direction::LogRDown, .. })));
}
