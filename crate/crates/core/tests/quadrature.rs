use proptest::prelude::*;
use proptest::strategy::ValueTree;
use rivalfit_core::cubature::{
    self, expect_reward_integrand, hermite_rule, psd_sqrt, Indicator, Integrator,
};
use rivalfit_core::model::build_covariance_symmetric;
use rivalfit_core::{Error, FeatureRegime, GameCovariance, SymmetricStrategyPair, MEAN_ABS_NORMAL};

/// `E Z^d` for a standard normal: 0 for odd `d`, `(d-1)!!` for even `d`.
fn normal_moment(d: u32) -> f64 {
    if d % 2 == 1 {
        0.0
    } else {
        (1..d).step_by(2).map(f64::from).product()
    }
}

#[test]
fn rules_are_exact_for_low_degree_monomials() {
    for m in 1..=20usize {
        let rule = hermite_rule(m).unwrap();
        for d in 0..(2 * m as u32) {
            let got = rule.integrate(|x| x.powi(d as i32));
            let want = normal_moment(d);
            // odd moments vanish; measure against the absolute moment instead
            let scale = if want == 0.0 {
                rule.integrate(|x| x.abs().powi(d as i32)).max(1.0)
            } else {
                want
            };
            assert!(
                (got - want).abs() <= 1e-8 * scale,
                "m={m} d={d}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn three_point_rule_closed_form() {
    let rule = hermite_rule(3).unwrap();
    let s3 = 3f64.sqrt();
    for (x, want) in rule.nodes().iter().zip([-s3, 0.0, s3]) {
        assert!((x - want).abs() < 1e-15);
    }
    for (w, want) in rule.weights().iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
        assert!((w - want).abs() < 1e-15);
    }
    assert!((rule.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-13);
}

#[test]
fn order_limits() {
    assert!(matches!(hermite_rule(0), Err(Error::InvalidOrder(0))));
    assert!(matches!(hermite_rule(513), Err(Error::InvalidOrder(513))));
    let big = hermite_rule(512).unwrap();
    assert!((big.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

fn random_sigma() -> impl Strategy<Value = GameCovariance> {
    (
        proptest::array::uniform3(-1.0f64..1.0),
        proptest::array::uniform3(-1.0f64..1.0),
        0.05f64..1.0,
    )
        .prop_map(|(r1, r2, d)| {
            // rows of a random factor with first row (1, 0, 0)
            let l = [
                [1.0, 0.0, 0.0],
                [r1[0], r1[1].abs() + 0.05, 0.0],
                [r2[0], r2[1], d],
            ];
            let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            GameCovariance::new(
                dot(l[0], l[1]),
                dot(l[0], l[2]),
                dot(l[1], l[1]),
                dot(l[1], l[2]),
                dot(l[2], l[2]),
                1.0,
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factor_reconstructs(sigma in random_sigma()) {
        let f = psd_sqrt(&sigma).unwrap();
        let r = f.reconstruct();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((r[i][j] - sigma.matrix()[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn column_sign_does_not_matter(sigma in random_sigma(), col in 0usize..3) {
        let integrator = Integrator::new(40).unwrap();
        let grid = integrator.grid(&sigma).unwrap();
        let base = grid.expectation(Indicator::AWins);
        let flipped = cubature::CubatureGrid::new(&integrator, grid.factor().negate_column(col));
        prop_assert!((flipped.expectation(Indicator::AWins) - base).abs() < 1e-12);
    }

    #[test]
    fn complementary_indicators_sum_to_total(sigma in random_sigma()) {
        let integrator = Integrator::new(60).unwrap();
        let grid = integrator.grid(&sigma).unwrap();
        let a = grid.expectation(Indicator::AWins);
        let b = grid.expectation(Indicator::BWins);
        let total = grid.expectation(Indicator::Always);
        prop_assert!((a + b - total).abs() < 1e-14, "{}", a + b - total);
        prop_assert!((total - MEAN_ABS_NORMAL).abs() < 1e-12);
        prop_assert!(a >= 0.0 && b >= 0.0);
    }

    #[test]
    fn product_grid_mass_is_one(sigma in random_sigma(), m in 1usize..24) {
        let integrator = Integrator::new(m).unwrap();
        let mass = integrator.grid(&sigma).unwrap().total_mass();
        prop_assert!((mass - 1.0).abs() < 1e-10);
    }
}

#[test]
fn results_stabilize_with_order() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let mut violations = 0;
    for _ in 0..20 {
        let sigma = random_sigma().new_tree(&mut runner).unwrap().current();
        let at = |m| expect_reward_integrand(&sigma, m).unwrap();
        let diffs: Vec<f64> = [16, 32, 48, 64]
            .iter()
            .map(|&m| (at(m) - at(m + 16)).abs())
            .collect();
        // differences at rounding level carry no trend
        violations += diffs
            .windows(2)
            .filter(|w| w[1] > w[0] && w[1] > 1e-13)
            .count();
    }
    assert!(violations <= 2, "{violations} increases");
}

#[test]
fn identity_covariance_gives_half_of_mean_abs() {
    let sigma = GameCovariance::new(0.0, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();
    for m in [40, 60] {
        let u = expect_reward_integrand(&sigma, m).unwrap();
        assert!((u - MEAN_ABS_NORMAL / 2.0).abs() < 5e-3, "m={m}: {u}");
    }
}

#[test]
fn degenerate_covariances() {
    // e1 = e2 almost surely
    let tie = GameCovariance::new(0.4, 0.4, 0.5, 0.5, 0.5, 1.0).unwrap();
    assert_eq!(expect_reward_integrand(&tie, 60).unwrap(), 0.0);
    // A perfect, B not
    let perfect = GameCovariance::new(0.0, 0.5, 0.0, 0.0, 0.5, 1.0).unwrap();
    let u = expect_reward_integrand(&perfect, 60).unwrap();
    assert!((u - MEAN_ABS_NORMAL).abs() < 5e-3, "{u}");
    // both perfect: every comparison ties
    let both = GameCovariance::new(0.0, 0.0, 0.0, 0.0, 0.0, 1.0).unwrap();
    assert_eq!(expect_reward_integrand(&both, 60).unwrap(), 0.0);
}

#[test]
fn gaussian_analogue_factor() {
    let sigma = GameCovariance::new(0.5, 0.25, 0.5, 0.0, 0.25, 1.0).unwrap();
    let f = psd_sqrt(&sigma).unwrap();
    let r = f.reconstruct();
    for i in 0..3 {
        for j in 0..3 {
            assert!((r[i][j] - sigma.matrix()[i][j]).abs() < 1e-9);
        }
    }
}

#[test]
fn gate_keeps_default_order_when_converged() {
    let regime = FeatureRegime::new(0.3, 0.7, 0.21).unwrap();
    let sigma =
        build_covariance_symmetric(&regime, &SymmetricStrategyPair::new(2.0, 1.5, 1.1, 1.2))
            .unwrap();
    let g = cubature::expect_gated(&sigma, 60, Indicator::AWins).unwrap();
    assert_eq!(g.order, 60);
    assert!(g.gap < cubature::GATE_TOL);
}
