use num_rational::Ratio;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rivalfit_core::discrete::{enumerate_discrete, parse_rational, DiscreteGame, Rational};
use rivalfit_core::solver::{discrete_maxmin_equal, rational_grid};

/// Uniform on `[0, 3]` with a resolution of `1e-6`.
fn coefficient(rng: &mut ChaCha8Rng) -> Rational {
    Rational::new((rng.next_u64() % 3_000_001) as i128, 1_000_000)
}

fn one() -> Rational {
    Rational::from_integer(1)
}

#[test]
fn theoretical_play_gives_three_sixteenths() {
    let e =
        enumerate_discrete(&DiscreteGame::four_feature_example([one(); 2], [one(); 3])).unwrap();
    assert_eq!(e.r1, Ratio::new(3, 16));
    assert_eq!(e.r2, Ratio::new(29, 16));
    assert_eq!(e.rows.len(), 16);
}

#[test]
fn total_reward_is_always_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let alpha = [coefficient(&mut rng), coefficient(&mut rng)];
        let beta = [
            coefficient(&mut rng),
            coefficient(&mut rng),
            coefficient(&mut rng),
        ];
        let e = enumerate_discrete(&DiscreteGame::four_feature_example(alpha, beta)).unwrap();
        assert_eq!(e.total(), Rational::from_integer(2), "{alpha:?} {beta:?}");
    }
}

#[test]
fn rows_reproduce_rewards() {
    let r = |t| parse_rational(t).unwrap();
    let e = enumerate_discrete(&DiscreteGame::four_feature_example(
        [r("2.1"); 2],
        [r("0.9"), r("1.4"), r("1.4")],
    ))
    .unwrap();
    let r1: Rational = e
        .rows
        .iter()
        .map(|row| row.probability * Rational::from_integer(row.r1 as i128))
        .sum();
    assert_eq!(r1, e.r1);
    let total: Rational = e
        .rows
        .iter()
        .map(|row| row.probability * Rational::from_integer(row.y.abs() as i128))
        .sum();
    assert_eq!(total, Rational::from_integer(2));
}

#[test]
fn decimal_ties_are_exact() {
    // on outcome 1100: e1 = 2 - 2(0.7) and e2 = 2 - 1.4 are equal, so B takes it
    let r = |t| parse_rational(t).unwrap();
    let e = enumerate_discrete(&DiscreteGame::four_feature_example(
        [r("0.7"); 2],
        [r("1.4"); 3],
    ))
    .unwrap();
    let row = &e.rows[0b1100];
    assert_eq!(row.e1, row.e2);
    assert_eq!(row.r1, 0);
}

/// Brute force over every grid pair, with no pruning.
fn brute_maxmin(grid: &[Rational]) -> (Rational, Vec<Rational>) {
    let mut best: Option<(Rational, Vec<Rational>)> = None;
    for &a in grid {
        let inner = grid
            .iter()
            .map(|&b| {
                enumerate_discrete(&DiscreteGame::four_feature_example([a; 2], [b; 3]))
                    .unwrap()
                    .r1
            })
            .min()
            .unwrap();
        match &mut best {
            Some((v, args)) if inner == *v => args.push(a),
            Some((v, _)) if inner < *v => {}
            _ => best = Some((inner, vec![a])),
        }
    }
    best.unwrap()
}

#[test]
fn pruned_maxmin_matches_brute_force() {
    for step in [
        Rational::new(1, 4),
        Rational::new(1, 10),
        Rational::new(1, 20),
    ] {
        let (lo, hi) = (Rational::from_integer(0), Rational::from_integer(3));
        let grid = rational_grid(lo, hi, step).unwrap();
        let (value, args) = brute_maxmin(&grid);
        let m = discrete_maxmin_equal(lo, hi, step).unwrap();
        assert_eq!(m.value, value, "step {step}");
        assert_eq!(
            (m.alpha, m.alpha_last, m.maximizers),
            (args[0], *args.last().unwrap(), args.len())
        );
        assert_eq!(m.baseline, Rational::new(3, 16));
        let response = enumerate_discrete(&DiscreteGame::four_feature_example(
            [m.alpha; 2],
            [m.beta_response; 3],
        ))
        .unwrap()
        .r1;
        assert_eq!(response, m.value);
    }
}
