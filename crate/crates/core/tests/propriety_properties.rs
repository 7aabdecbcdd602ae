use bbl_core::propriety::{classify, decide, Status, ThresholdMode};
use bbl_core::{BetaPrior, Dataset, GaussianPrior, Group, HyperPriorSpec, RPrior};
use proptest::prelude::*;

fn prior_strategy(m: usize) -> impl Strategy<Value = HyperPriorSpec> {
    let f = prop_oneof![
        Just(RPrior::DrOverR),
        (prop::sample::select(vec![0.0, 0.5, 2.0]), prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0]))
            .prop_map(|(t, u)| RPrior::PowerLaw { t, u }),
    ];
    let g = prop_oneof![Just(BetaPrior::Flat), Just(BetaPrior::Gaussian(GaussianPrior::isotropic(m, 10.0).unwrap())),];
    (f, g).prop_map(|(f, g)| HyperPriorSpec::new(f, g).unwrap())
}

fn covariates(m: usize) -> impl Strategy<Value = Vec<f64>> {
    // Small integers make exact rank deficiencies common.
    prop::collection::vec((-2i32..=2).prop_map(f64::from), m)
}

fn interior_group(m: usize) -> impl Strategy<Value = Group> {
    (2u32..20, covariates(m)).prop_flat_map(|(n, x)| (1..n).prop_map(move |y| Group::new(n, y, x.clone()).unwrap()))
}

fn extreme_group(m: usize) -> impl Strategy<Value = Group> {
    (1u32..20, any::<bool>(), covariates(m))
        .prop_map(|(n, success, x)| Group::new(n, if success { n } else { 0 }, x).unwrap())
}

fn case() -> impl Strategy<Value = (Dataset, Vec<Group>, HyperPriorSpec)> {
    (1usize..=3).prop_flat_map(|m| {
        (
            prop::collection::vec(interior_group(m), 1..6),
            prop::collection::vec(extreme_group(m), 0..3),
            prop::collection::vec(extreme_group(m), 1..=3),
            prior_strategy(m),
        )
            .prop_map(|(interior, extremes, extra, hp)| {
                let mut groups = interior;
                groups.extend(extremes);
                (Dataset::new(groups).unwrap(), extra, hp)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn appending_extreme_groups_keeps_verdict((data, extra, hp) in case()) {
        prop_assume!(classify(&data).k_y >= 1);
        let augmented = data.with_groups(extra).unwrap();
        for mode in [ThresholdMode::Literal, ThresholdMode::Corrected] {
            let before = decide(&data, &hp, mode).unwrap();
            let after = decide(&augmented, &hp, mode).unwrap();
            prop_assert_eq!(before.status, after.status);
        }
    }

    #[test]
    fn verdict_ignores_group_order((data, _extra, hp) in case(), rot in 0usize..8) {
        let mut groups = data.groups().to_vec();
        let len = groups.len();
        groups.rotate_left(rot % len);
        groups.reverse();
        let permuted = Dataset::new(groups).unwrap();
        for mode in [ThresholdMode::Literal, ThresholdMode::Corrected] {
            prop_assert_eq!(decide(&data, &hp, mode).unwrap().status, decide(&permuted, &hp, mode).unwrap().status);
        }
    }

    #[test]
    fn verdict_ignores_column_scaling((data, _extra, hp) in case(), scale in prop::sample::select(vec![-3.5, 0.01, 7.0, 1e3])) {
        prop_assume!(matches!(hp.g, BetaPrior::Flat));
        let scaled = Dataset::new(
            data.groups()
                .iter()
                .map(|g| {
                    let mut x = g.x().to_vec();
                    x[0] *= scale;
                    Group::new(g.n(), g.y(), x).unwrap()
                })
                .collect(),
        )
        .unwrap();
        prop_assert_eq!(classify(&data).rank_xy, classify(&scaled).rank_xy);
        let mode = ThresholdMode::Corrected;
        prop_assert_eq!(decide(&data, &hp, mode).unwrap().status, decide(&scaled, &hp, mode).unwrap().status);
    }

    #[test]
    fn modes_differ_only_at_fractional_u((data, _extra, hp) in case()) {
        let literal = decide(&data, &hp, ThresholdMode::Literal).unwrap();
        let corrected = decide(&data, &hp, ThresholdMode::Corrected).unwrap();
        if let RPrior::PowerLaw { u, .. } = hp.f {
            if u.fract() == 0.0 {
                prop_assert_eq!(literal.status, corrected.status);
            }
        }
        prop_assert_eq!(literal.discrepancy_flag, literal.status != corrected.status);
        prop_assert_eq!(corrected.discrepancy_flag, literal.status != corrected.status);
    }

    #[test]
    fn interior_only_verdict_matches_its_interior_subset((data, _extra, hp) in case()) {
        let c = classify(&data);
        let interior = data.subset(&c.interior_idx).unwrap();
        let mode = ThresholdMode::Corrected;
        prop_assert_eq!(decide(&data, &hp, mode).unwrap().status, decide(&interior, &hp, mode).unwrap().status);
    }
}

#[test]
fn improper_r_prior_without_interior_groups() {
    let d = Dataset::intercept_only(&[(3, 0), (4, 4)]).unwrap();
    let hp = HyperPriorSpec::new(RPrior::PowerLaw { t: 0.0, u: 1.0 }, BetaPrior::Flat).unwrap();
    assert_eq!(decide(&d, &hp, ThresholdMode::Corrected).unwrap().status, Status::Improper);
}
