use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rivalfit_core::discrete::{enumerate_discrete, mc_discrete, to_f64, DiscreteGame, Rational};
use rivalfit_core::mc::{mc_reward, McModel};
use rivalfit_core::reward::{reward_general, reward_split, reward_symmetric};
use rivalfit_core::{FeatureRegime, FeatureSets, GeneralStrategyPair, SymmetricStrategyPair};

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn random_regime(rng: &mut ChaCha8Rng) -> FeatureRegime {
    loop {
        let g1 = uniform(rng, 0.05, 0.95);
        let g2 = uniform(rng, 0.05, 0.95);
        let lo = (g1 + g2 - 1.0).max(0.0);
        let g12 = uniform(rng, lo, g1.min(g2));
        if let Ok(r) = FeatureRegime::new(g1, g2, g12) {
            return r;
        }
    }
}

#[test]
fn cubature_agrees_with_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..8 {
        let regime = random_regime(&mut rng);
        let c: Vec<f64> = (0..4).map(|_| uniform(&mut rng, -1.0, 3.0)).collect();
        let strat = SymmetricStrategyPair::new(c[0], c[1], c[2], c[3]);
        let cub = reward_symmetric(&regime, &strat, 60).unwrap().value;
        let model = McModel::from_regime(&regime, &strat, 10_000).unwrap();
        let mc = mc_reward(&model, 200_000, 7 + case, 1).unwrap().a;
        let tol = 3.0 * mc.error_bound + 2e-3;
        assert!(
            (cub - mc.value).abs() <= tol,
            "case {case}: {cub} vs {} ± {}",
            mc.value,
            mc.error_bound
        );
    }
}

#[test]
fn general_and_symmetric_rewards_agree() {
    let regime = FeatureRegime::new(0.25, 0.5, 0.125).unwrap();
    let sets = FeatureSets::from_regime(&regime, 64).unwrap();
    let strat = SymmetricStrategyPair::new(1.8, 0.6, 1.1, 0.9);
    let general = GeneralStrategyPair::from_symmetric(&sets, &strat);
    let a = reward_general(&sets, &general, 60).unwrap().value;
    let b = reward_symmetric(&sets.regime(), &strat, 60).unwrap().value;
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
}

#[test]
fn split_matches_monte_carlo_partition() {
    let regime = FeatureRegime::new(0.4, 0.6, 0.24).unwrap();
    let strat = SymmetricStrategyPair::new(2.0, 1.3, 1.0, 1.0);
    let split = reward_split(&regime, &strat, 60).unwrap();
    let model = McModel::from_regime(&regime, &strat, 10_000).unwrap();
    let report = mc_reward(&model, 200_000, 3, 4).unwrap();
    assert_eq!(report.partition_violations, 0);
    assert!((split.a - report.a.value).abs() <= 3.0 * report.a.error_bound + 2e-3);
    assert!((split.b - report.b.value).abs() <= 3.0 * report.b.error_bound + 2e-3);
    assert!((split.a + split.b - split.total).abs() < 1e-14);
}

#[test]
fn enumerator_agrees_with_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..5 {
        let mut c = || Rational::new((rng.next_u64() % 3001) as i128, 1000);
        let alpha = [c(), c()];
        let beta = [c(), c(), c()];
        let game = DiscreteGame::four_feature_example(alpha, beta);
        let exact = to_f64(enumerate_discrete(&game).unwrap().r1);
        let sampled = mc_discrete(&game, 100_000, case).unwrap();
        assert!(
            (exact - sampled.value).abs() <= 4.0 * sampled.error_bound + 1e-12,
            "case {case}: {exact} vs {}",
            sampled.value
        );
    }
}
