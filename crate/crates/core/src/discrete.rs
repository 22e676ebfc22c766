//! Exact rewards when features take finitely many integer values.
//!
//! Every outcome in `domain^n` is enumerated. Coefficients are rationals, so
//! errors are compared exactly (a tie is a tie, and goes to B) and the
//! expectation is accumulated exactly: `R1 + R2 = E|y|` with no rounding.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Signed, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::model::FeatureSets;
use crate::reward::{Method, RewardEstimate};
use crate::{Error, Result};

pub type Rational = Ratio<i128>;

/// Largest number of outcomes the enumerator will visit.
pub const MAX_STATES: u128 = 1 << 24;

/// Per-feature values with their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDomain {
    entries: Vec<(i64, Rational)>,
}

impl ValueDomain {
    pub fn new(entries: Vec<(i64, Rational)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidModel("value domain is empty".into()));
        }
        if entries.iter().any(|(_, p)| *p < Rational::from_integer(0)) {
            return Err(Error::InvalidModel(
                "probabilities must be nonnegative".into(),
            ));
        }
        let total: Rational = entries.iter().map(|(_, p)| *p).sum();
        if total != Rational::from_integer(1) {
            return Err(Error::InvalidModel("probabilities must sum to 1".into()));
        }
        Ok(Self { entries })
    }

    /// `{0, 1}` with probability one half each.
    pub fn fair_bits() -> Self {
        let half = Rational::new(1, 2);
        Self {
            entries: alloc::vec![(0, half), (1, half)],
        }
    }

    pub fn entries(&self) -> &[(i64, Rational)] {
        &self.entries
    }
}

/// Parses `p/q`, an integer, or a decimal such as `-2.01` or `1.5e-2` into
/// the exact rational it denotes.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let bad = || Error::InvalidStrategy(alloc::format!("'{text}' is not a decimal or p/q"));
    let t = text.trim();
    if let Some((p, q)) = t.split_once('/') {
        let p: i128 = p.trim().parse().map_err(|_| bad())?;
        let q: i128 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(p, q));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let mut joined = int.to_string();
    joined.push_str(frac);
    let numer: i128 = joined
        .trim_start_matches('0')
        .parse()
        .or_else(|e| {
            if joined.chars().all(|c| c == '0') {
                Ok(0)
            } else {
                Err(e)
            }
        })
        .map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let pow = |k: u32| 10i128.checked_pow(k).ok_or_else(bad);
    let value = if scale >= 0 {
        Rational::from_integer(numer.checked_mul(pow(scale as u32)?).ok_or_else(bad)?)
    } else {
        Rational::new(numer, pow(scale.unsigned_abs())?)
    };
    Ok(if negative { -value } else { value })
}

/// Per-feature rational coefficients for both players.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStrategy {
    pub alpha1: BTreeMap<usize, Rational>,
    pub alpha2: BTreeMap<usize, Rational>,
}

impl DiscreteStrategy {
    pub fn new(alpha1: BTreeMap<usize, Rational>, alpha2: BTreeMap<usize, Rational>) -> Self {
        Self { alpha1, alpha2 }
    }

    pub fn validate(&self, sets: &FeatureSets) -> Result<()> {
        for (who, map, set) in [
            ("A", &self.alpha1, sets.s1()),
            ("B", &self.alpha2, sets.s2()),
        ] {
            if !map.keys().eq(set.iter()) {
                return Err(Error::InvalidStrategy(alloc::format!(
                    "player {who}'s coefficients must cover exactly its feature set"
                )));
            }
        }
        Ok(())
    }
}

/// A game over discrete features.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGame {
    pub sets: FeatureSets,
    pub domain: ValueDomain,
    pub strat: DiscreteStrategy,
}

impl DiscreteGame {
    pub fn new(sets: FeatureSets, domain: ValueDomain, strat: DiscreteStrategy) -> Result<Self> {
        strat.validate(&sets)?;
        Ok(Self {
            sets,
            domain,
            strat,
        })
    }

    /// Four fair bits; A sees features 1-2 with `alpha`, B sees 2-4 with `beta`.
    pub fn four_feature_example(alpha: [Rational; 2], beta: [Rational; 3]) -> Self {
        let sets = FeatureSets::new(4, [1, 2], [2, 3, 4]).expect("static sets");
        let strat = DiscreteStrategy::new(
            [(1, alpha[0]), (2, alpha[1])].into(),
            [(2, beta[0]), (3, beta[1]), (4, beta[2])].into(),
        );
        Self {
            sets,
            domain: ValueDomain::fair_bits(),
            strat,
        }
    }
}

/// One enumerated outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRow {
    /// Feature values `x_1..x_n`.
    pub pattern: Vec<i64>,
    pub e1: Rational,
    pub e2: Rational,
    pub y: i64,
    /// A's reward: `|y|` if `|e1| < |e2|`, else 0.
    pub r1: i64,
    pub probability: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub r1: Rational,
    pub r2: Rational,
    /// Outcomes in lexicographic order of `pattern`.
    pub rows: Vec<OutcomeRow>,
}

impl Enumeration {
    pub fn total(&self) -> Rational {
        self.r1 + self.r2
    }

    pub fn estimate_a(&self) -> RewardEstimate {
        RewardEstimate {
            value: to_f64(self.r1),
            method: Method::ExactEnumeration,
            order_or_samples: self.rows.len() as u64,
            error_bound: 0.0,
            scale_applied: 1.0,
        }
    }
}

pub fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Coefficient-independent part of a discrete game: all outcomes with
/// their probabilities and targets. Reused across strategy evaluations.
#[derive(Debug, Clone)]
pub struct OutcomeTable {
    n: usize,
    patterns: Vec<i64>,
    probabilities: Vec<Rational>,
    targets: Vec<i64>,
}

impl OutcomeTable {
    pub fn new(n: usize, domain: &ValueDomain) -> Result<Self> {
        let k = domain.entries.len() as u128;
        let states = (0..n)
            .try_fold(1u128, |acc, _| acc.checked_mul(k))
            .unwrap_or(u128::MAX);
        if states > MAX_STATES {
            return Err(Error::Capacity {
                states,
                limit: MAX_STATES,
            });
        }
        let states = states as usize;
        let mut patterns = Vec::with_capacity(states * n);
        let mut probabilities = Vec::with_capacity(states);
        let mut targets = Vec::with_capacity(states);
        let mut digits = alloc::vec![0usize; n];
        for _ in 0..states {
            let mut p = Rational::from_integer(1);
            let mut y = 0i64;
            for &d in &digits {
                let (v, pv) = domain.entries[d];
                patterns.push(v);
                p *= pv;
                y += v;
            }
            probabilities.push(p);
            targets.push(y);
            // odometer, last feature fastest
            for pos in (0..n).rev() {
                digits[pos] += 1;
                if digits[pos] < domain.entries.len() {
                    break;
                }
                digits[pos] = 0;
            }
        }
        Ok(Self {
            n,
            patterns,
            probabilities,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn pattern(&self, idx: usize) -> &[i64] {
        &self.patterns[idx * self.n..(idx + 1) * self.n]
    }

    /// Errors `(e1, e2)` for one outcome; `coef` holds `(α_A, α_B)` per feature.
    fn errors(&self, idx: usize, coef: &[(Rational, Rational)]) -> Result<(Rational, Rational)> {
        let overflow = || Error::NumericalFailure("rational overflow evaluating errors".into());
        let y = Rational::from_integer(self.targets[idx] as i128);
        let (mut e1, mut e2) = (y, y);
        for (&x, (c1, c2)) in self.pattern(idx).iter().zip(coef) {
            if x == 0 {
                continue;
            }
            let x = Rational::from_integer(x as i128);
            e1 = e1
                .checked_sub(&c1.checked_mul(&x).ok_or_else(overflow)?)
                .ok_or_else(overflow)?;
            e2 = e2
                .checked_sub(&c2.checked_mul(&x).ok_or_else(overflow)?)
                .ok_or_else(overflow)?;
        }
        Ok((e1, e2))
    }

    /// Exact `(R1, R2)`.
    pub fn rewards(&self, coef: &[(Rational, Rational)]) -> Result<(Rational, Rational)> {
        let mut r1 = Rational::zero();
        let mut r2 = Rational::zero();
        for idx in 0..self.len() {
            let (e1, e2) = self.errors(idx, coef)?;
            let gain =
                self.probabilities[idx] * Rational::from_integer(self.targets[idx].abs() as i128);
            let winner = if e1.abs() < e2.abs() {
                &mut r1
            } else {
                &mut r2
            };
            *winner = winner.checked_add(&gain).ok_or_else(|| {
                Error::NumericalFailure("rational overflow accumulating rewards".into())
            })?;
        }
        Ok((r1, r2))
    }

    /// Exact `E|y|`.
    pub fn mean_abs_target(&self) -> Rational {
        self.probabilities
            .iter()
            .zip(&self.targets)
            .map(|(p, &y)| *p * Rational::from_integer(y.abs() as i128))
            .sum()
    }
}

/// Dense per-feature coefficients `(α_A, α_B)`, zero where unseen.
pub fn coefficient_table(
    sets: &FeatureSets,
    strat: &DiscreteStrategy,
) -> Vec<(Rational, Rational)> {
    let get =
        |map: &BTreeMap<usize, Rational>, i| map.get(&i).copied().unwrap_or_else(Rational::zero);
    (1..=sets.n())
        .map(|i| (get(&strat.alpha1, i), get(&strat.alpha2, i)))
        .collect()
}

/// Exhaustive enumeration of a discrete game, with every outcome row.
pub fn enumerate_discrete(game: &DiscreteGame) -> Result<Enumeration> {
    game.strat.validate(&game.sets)?;
    let table = OutcomeTable::new(game.sets.n(), &game.domain)?;
    let coef = coefficient_table(&game.sets, &game.strat);
    let (r1, r2) = table.rewards(&coef)?;
    let rows = (0..table.len())
        .map(|idx| {
            let (e1, e2) = table.errors(idx, &coef)?;
            let y = table.targets[idx];
            Ok(OutcomeRow {
                pattern: table.pattern(idx).to_vec(),
                e1,
                e2,
                y,
                r1: if e1.abs() < e2.abs() { y.abs() } else { 0 },
                probability: table.probabilities[idx],
            })
        })
        .collect::<Result<_>>()?;
    Ok(Enumeration { r1, r2, rows })
}

/// Monte Carlo estimate of A's reward on a discrete game, for checking the
/// enumerator. Values are drawn by inverse CDF on 53-bit uniforms.
pub fn mc_discrete(game: &DiscreteGame, samples: u64, seed: u64) -> Result<RewardEstimate> {
    crate::mc::check_samples(samples)?;
    game.strat.validate(&game.sets)?;
    let coef: Vec<(f64, f64)> = coefficient_table(&game.sets, &game.strat)
        .into_iter()
        .map(|(c1, c2)| (to_f64(c1), to_f64(c2)))
        .collect();
    let cdf: Vec<(f64, i64)> = {
        let mut acc = Rational::from_integer(0);
        game.domain
            .entries
            .iter()
            .map(|&(v, p)| {
                acc += p;
                (to_f64(acc), v)
            })
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let (mut y, mut y1, mut y2) = (0.0, 0.0, 0.0);
        for &(c1, c2) in &coef {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let x = cdf
                .iter()
                .find(|(c, _)| u < *c)
                .map_or(cdf[cdf.len() - 1].1, |&(_, v)| v) as f64;
            y += x;
            y1 += c1 * x;
            y2 += c2 * x;
        }
        let (r1, _) = crate::mc::split_reward(y, y - y1, y - y2);
        sum += r1;
        sum_sq += r1 * r1;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - sum * mean) / (n - 1.0)).max(0.0);
    Ok(RewardEstimate {
        value: mean,
        method: Method::MonteCarlo,
        order_or_samples: samples,
        error_bound: libm::sqrt(var / n),
        scale_applied: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> Rational {
        Rational::from_integer(1)
    }

    #[test]
    fn rational_parsing() {
        let r = |t| parse_rational(t).unwrap();
        assert_eq!(r("2.01"), Rational::new(201, 100));
        assert_eq!(r("-0.5"), Rational::new(-1, 2));
        assert_eq!(r("3/16"), Rational::new(3, 16));
        assert_eq!(r("1e-2"), Rational::new(1, 100));
        assert_eq!(r("1.5E3"), Rational::from_integer(1500));
        assert_eq!(r(".25"), Rational::new(1, 4));
        assert_eq!(r("0"), Rational::zero());
        assert_eq!(r("+007"), Rational::from_integer(7));
        for bad in ["", ".", "abc", "1/0", "1.2.3", "--1", "1e", "nan"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn ties_go_to_b_exactly() {
        // on 1100 both errors are 2 - 4.02; in f64 the two sides round differently
        let r = |t| parse_rational(t).unwrap();
        let e = enumerate_discrete(&DiscreteGame::four_feature_example(
            [r("2.01"), r("2.01")],
            [r("4.02"), r("4.02"), r("4.02")],
        ))
        .unwrap();
        let row = &e.rows[0b1100];
        assert_eq!(row.e1.abs(), row.e2.abs());
        assert_eq!(row.r1, 0);
    }

    #[test]
    fn theoretical_players() {
        let e = enumerate_discrete(&DiscreteGame::four_feature_example([one(); 2], [one(); 3]))
            .unwrap();
        assert_eq!(e.r1, Rational::new(3, 16));
        assert_eq!(e.r2, Rational::new(29, 16));
        assert_eq!(to_f64(e.r1), 0.1875);
        assert_eq!(to_f64(e.r2), 1.8125);
        assert_eq!(e.total(), Rational::from_integer(2));
        assert_eq!(e.rows.len(), 16);
    }

    #[test]
    fn row_1100() {
        let e = enumerate_discrete(&DiscreteGame::four_feature_example([one(); 2], [one(); 3]))
            .unwrap();
        let row = &e.rows[0b1100];
        assert_eq!(row.pattern, alloc::vec![1, 1, 0, 0]);
        assert_eq!(
            (row.e1, row.e2, row.y, row.r1),
            (Rational::zero(), one(), 2, 2)
        );
    }

    #[test]
    fn rows_are_lexicographic() {
        let r = |t| parse_rational(t).unwrap();
        let e = enumerate_discrete(&DiscreteGame::four_feature_example(
            [r("0.3"), r("2")],
            [r("1"), r("1/2"), r("2.5")],
        ))
        .unwrap();
        for w in e.rows.windows(2) {
            assert!(w[0].pattern < w[1].pattern);
        }
        assert_eq!(e.total(), Rational::from_integer(2));
    }

    #[test]
    fn capacity_guard() {
        let sets = FeatureSets::new(25, [1], [2]).unwrap();
        let strat = DiscreteStrategy::new([(1, one())].into(), [(2, one())].into());
        let game = DiscreteGame::new(sets, ValueDomain::fair_bits(), strat).unwrap();
        assert!(matches!(
            enumerate_discrete(&game),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn domain_validation() {
        assert!(ValueDomain::new(alloc::vec![
            (0, Rational::new(1, 3)),
            (1, Rational::new(1, 3))
        ])
        .is_err());
        let d = ValueDomain::new(alloc::vec![
            (-1, Rational::new(1, 4)),
            (0, Rational::new(1, 2)),
            (2, Rational::new(1, 4)),
        ])
        .unwrap();
        let table = OutcomeTable::new(3, &d).unwrap();
        assert_eq!(table.len(), 27);
        let total: Rational = table.probabilities.iter().copied().sum();
        assert_eq!(total, Rational::from_integer(1));
    }
}
