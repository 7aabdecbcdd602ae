use approx::assert_relative_eq;
use bbl_core::bounds::{log_space, sandwich_audit, AUDIT_SLACK};
use bbl_core::model::{log_bb_pmf, log_likelihood, shrinkage_summary};
use bbl_core::special::logistic;
use bbl_core::{Dataset, Group};
use proptest::prelude::*;

fn binomial_pmf(n: u32, y: u32, p: f64) -> f64 {
    let mut c = 1.0;
    for i in 0..y {
        c = c * f64::from(n - i) / f64::from(i + 1);
    }
    c * p.powi(y as i32) * (1.0 - p).powi((n - y) as i32)
}

#[test]
fn pmf_sums_to_one() {
    for n in 1..=12u32 {
        for &r in &[0.1, 1.0, 10.0, 100.0] {
            for &p in &[0.05, 0.5, 0.95] {
                let total: f64 =
                    (0..=n).map(|y| log_bb_pmf(&Group::intercept(n, y).unwrap(), r, p).unwrap().exp()).sum();
                assert!((total - 1.0).abs() < 1e-12, "n={n} r={r} p={p}: {total}");
            }
        }
    }
}

#[test]
fn large_r_reaches_binomial() {
    let g = Group::intercept(5, 2).unwrap();
    let got = log_bb_pmf(&g, 1e8, 0.3).unwrap().exp();
    let want = binomial_pmf(5, 2, 0.3);
    assert_relative_eq!(got, want, max_relative = 1e-6);
    assert_relative_eq!(want, 0.3087, max_relative = 1e-12);
}

#[test]
fn small_r_concentrates_on_extremes() {
    // r → 0: the Beta prior piles mass at 0 and 1, so only y = 0 or y = n survive.
    let p = 0.3;
    let all = log_bb_pmf(&Group::intercept(4, 4).unwrap(), 1e-9, p).unwrap().exp();
    let none = log_bb_pmf(&Group::intercept(4, 0).unwrap(), 1e-9, p).unwrap().exp();
    assert_relative_eq!(all, p, max_relative = 1e-6);
    assert_relative_eq!(none, 1.0 - p, max_relative = 1e-6);
}

fn hospitals() -> Dataset {
    let n = [54, 75, 93, 104, 105];
    let y = [3, 4, 1, 1, 1];
    let emr = [4.30, 2.21, 2.59, 4.73, 3.28];
    Dataset::new((0..5).map(|j| Group::new(n[j], y[j], vec![1.0, emr[j]]).unwrap()).collect()).unwrap()
}

#[test]
fn coin_grid_sandwich_audit() {
    let betas: Vec<[f64; 1]> = (0..=40).map(|i| [-10.0 + 0.5 * f64::from(i)]).collect();
    let rs = log_space(1e-3, 1e3, 25);
    for y1 in 0..=2 {
        for y2 in 0..=2 {
            let d = Dataset::intercept_only(&[(2, y1), (2, y2)]).unwrap();
            let grid = rs.iter().flat_map(|&r| betas.iter().map(move |b| (r, &b[..])));
            let audit = sandwich_audit(&d, grid, AUDIT_SLACK).unwrap();
            assert!(audit.passed(), "({y1},{y2}): {audit:?}");
            assert_eq!(audit.points, 25 * 41);
        }
    }
}

#[test]
fn hospital_grid_sandwich_audit() {
    let d = hospitals();
    let mut betas = Vec::new();
    for k in 0..16 {
        let theta = f64::from(k) * std::f64::consts::PI / 8.0;
        for rho in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
            betas.push([-3.0 + rho * theta.cos(), rho * theta.sin()]);
        }
    }
    let rs = log_space(1e-3, 1e3, 25);
    let grid = rs.iter().flat_map(|&r| betas.iter().map(move |b| (r, &b[..])));
    let audit = sandwich_audit(&d, grid, AUDIT_SLACK).unwrap();
    assert!(audit.passed(), "{audit:?}");
}

#[test]
fn larger_groups_sandwich_audit() {
    let d = Dataset::intercept_only(&[(7, 3), (12, 1), (3, 3), (9, 0), (25, 24)]).unwrap();
    let betas: Vec<[f64; 1]> = (-6..=6).map(|i| [f64::from(i)]).collect();
    let rs = log_space(1e-4, 1e6, 31);
    let grid = rs.iter().flat_map(|&r| betas.iter().map(move |b| (r, &b[..])));
    assert!(sandwich_audit(&d, grid, AUDIT_SLACK).unwrap().passed());
}

fn group_strategy() -> impl Strategy<Value = (u32, u32, f64)> {
    (1u32..30).prop_flat_map(|n| (Just(n), 0..=n, -3.0f64..3.0))
}

proptest! {
    #[test]
    fn likelihood_ignores_group_order(
        groups in prop::collection::vec(group_strategy(), 1..7),
        r in 1e-3f64..1e4,
        b0 in -4.0f64..4.0,
        b1 in -1.0f64..1.0,
        rot in 0usize..7,
    ) {
        let make = |gs: &[(u32, u32, f64)]| {
            Dataset::new(gs.iter().map(|&(n, y, x)| Group::new(n, y, vec![1.0, x]).unwrap()).collect()).unwrap()
        };
        let mut shuffled = groups.clone();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        shuffled.reverse();
        let a = log_likelihood(&make(&groups), r, &[b0, b1]).unwrap();
        let b = log_likelihood(&make(&shuffled), r, &[b0, b1]).unwrap();
        prop_assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0));
    }

    #[test]
    fn posterior_mean_lies_between_data_and_prior(
        (n, y, x) in group_strategy(),
        r in 1e-4f64..1e6,
        beta in -5.0f64..5.0,
    ) {
        let d = Dataset::new(vec![Group::new(n, y, vec![x]).unwrap()]).unwrap();
        let s = shrinkage_summary(&d, r, &[beta]).unwrap();
        let prop = f64::from(y) / f64::from(n);
        let pe = logistic(x * beta);
        let (lo, hi) = if prop < pe { (prop, pe) } else { (pe, prop) };
        let b = s.shrinkage[0];
        prop_assert!(b > 0.0 && b < 1.0);
        prop_assert!(s.post_mean[0] >= lo - 1e-12 && s.post_mean[0] <= hi + 1e-12);
        prop_assert!(s.post_var[0] > 0.0);
    }

    #[test]
    fn interior_sandwich_holds_off_grid(
        (n, y, _) in group_strategy(),
        ln_r in -12.0f64..14.0,
        beta in -30.0f64..30.0,
    ) {
        let d = Dataset::intercept_only(&[(n, y)]).unwrap();
        let b = [beta];
        let audit = sandwich_audit(&d, [(ln_r.exp(), &b[..])], AUDIT_SLACK).unwrap();
        prop_assert!(audit.passed(), "{:?}", audit);
    }
}
