//! Monte Carlo simulation of the per-instance rewards
//! `r1 = |y| 1(|e1| < |e2|)`, `r2 = |y| 1(|e1| >= |e2|)`.
//!
//! This is the oracle for the cubature route: it draws features directly
//! and never forms a covariance matrix. Work is split into independent
//! ChaCha8 streams (same seed, stream id = worker index) so a run is
//! reproducible for a fixed `(seed, streams)` pair regardless of scheduling.

use alloc::vec::Vec;
use libm::{fabs, sqrt};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{FeatureRegime, FeatureSets, GeneralStrategyPair, SymmetricStrategyPair};
use crate::reward::{Method, RewardEstimate};
use crate::{Error, Result};

pub const DEFAULT_FEATURES: usize = 10_000;
pub const MIN_SAMPLES: u64 = 1000;

/// What gets simulated.
#[derive(Debug, Clone, PartialEq)]
pub enum McModel {
    /// Block strategies on a realized regime. Each block's feature sum is
    /// drawn as one `sqrt(size) Z`, which has the same law as summing the
    /// block's features one by one.
    Blocks {
        sizes: BlockSizes,
        strat: SymmetricStrategyPair,
    },
    /// Explicit features and per-feature coefficients.
    Features {
        n: usize,
        /// `(coefficient for A, coefficient for B)` per feature, 0 when unseen.
        coefficients: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSizes {
    pub only1: usize,
    pub shared: usize,
    pub only2: usize,
    pub neither: usize,
}

impl BlockSizes {
    fn of(sets: &FeatureSets) -> Self {
        let only1 = sets.only1().count();
        let shared = sets.shared().count();
        let only2 = sets.only2().count();
        Self {
            only1,
            shared,
            only2,
            neither: sets.n() - only1 - shared - only2,
        }
    }

    pub fn n(&self) -> usize {
        self.only1 + self.shared + self.only2 + self.neither
    }
}

impl McModel {
    /// Realizes the regime with `n` features (nearest-integer block sizes).
    pub fn from_regime(
        regime: &FeatureRegime,
        strat: &SymmetricStrategyPair,
        n: usize,
    ) -> Result<Self> {
        strat.validate()?;
        let sets = FeatureSets::from_regime(regime, n)?;
        Ok(McModel::Blocks {
            sizes: BlockSizes::of(&sets),
            strat: *strat,
        })
    }

    pub fn from_sets(sets: &FeatureSets, strat: &GeneralStrategyPair) -> Result<Self> {
        strat.validate(sets)?;
        let coefficients = (1..=sets.n())
            .map(|i| {
                (
                    strat.alpha1.get(&i).copied().unwrap_or(0.0),
                    strat.alpha2.get(&i).copied().unwrap_or(0.0),
                )
            })
            .collect();
        Ok(McModel::Features {
            n: sets.n(),
            coefficients,
        })
    }

    pub fn n(&self) -> usize {
        match self {
            McModel::Blocks { sizes, .. } => sizes.n(),
            McModel::Features { n, .. } => *n,
        }
    }

    /// One draw of `(y, e1, e2)` in raw (unnormalized) units.
    fn draw<R: rand_core::RngCore>(&self, rng: &mut R) -> (f64, f64, f64) {
        match self {
            McModel::Blocks { sizes, strat } => {
                let mut block = |size: usize| {
                    if size == 0 {
                        0.0
                    } else {
                        let z: f64 = StandardNormal.sample(rng);
                        sqrt(size as f64) * z
                    }
                };
                let u1 = block(sizes.only1);
                let sh = block(sizes.shared);
                let u2 = block(sizes.only2);
                let rest = block(sizes.neither);
                let y = u1 + sh + u2 + rest;
                let y1 = strat.a11 * u1 + strat.a12 * sh;
                let y2 = strat.a21 * u2 + strat.a22 * sh;
                (y, y - y1, y - y2)
            }
            McModel::Features { coefficients, .. } => {
                let (mut y, mut y1, mut y2) = (0.0, 0.0, 0.0);
                for &(c1, c2) in coefficients {
                    let x: f64 = StandardNormal.sample(rng);
                    y += x;
                    y1 += c1 * x;
                    y2 += c2 * x;
                }
                (y, y - y1, y - y2)
            }
        }
    }
}

/// Per-instance rewards `(r1, r2)`; ties go to B.
#[inline]
pub fn split_reward(y: f64, e1: f64, e2: f64) -> (f64, f64) {
    let r = fabs(y);
    if fabs(e1) < fabs(e2) {
        (r, 0.0)
    } else {
        (0.0, r)
    }
}

/// Running sums for one stream.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct McAccumulator {
    pub count: u64,
    pub sum_r1: f64,
    pub sum_r1_sq: f64,
    pub sum_r2: f64,
    pub sum_r2_sq: f64,
    pub sum_abs_y: f64,
    pub sum_abs_y_sq: f64,
    /// Draws where `r1 + r2 != |y|` bitwise; always zero.
    pub partition_violations: u64,
}

impl McAccumulator {
    fn push(&mut self, y: f64, r1: f64, r2: f64) {
        self.count += 1;
        self.sum_r1 += r1;
        self.sum_r1_sq += r1 * r1;
        self.sum_r2 += r2;
        self.sum_r2_sq += r2 * r2;
        let a = fabs(y);
        self.sum_abs_y += a;
        self.sum_abs_y_sq += a * a;
        if r1 + r2 != a {
            self.partition_violations += 1;
        }
    }

    pub fn merge(&mut self, other: &McAccumulator) {
        self.count += other.count;
        self.sum_r1 += other.sum_r1;
        self.sum_r1_sq += other.sum_r1_sq;
        self.sum_r2 += other.sum_r2;
        self.sum_r2_sq += other.sum_r2_sq;
        self.sum_abs_y += other.sum_abs_y;
        self.sum_abs_y_sq += other.sum_abs_y_sq;
        self.partition_violations += other.partition_violations;
    }
}

/// Samples per stream: an even split with the remainder on the first streams.
pub fn stream_sizes(samples: u64, streams: u32) -> Vec<u64> {
    let streams = streams.max(1) as u64;
    (0..streams)
        .map(|s| samples / streams + u64::from(s < samples % streams))
        .collect()
}

/// Runs one stream. Rewards are normalized by `sqrt(n)`.
pub fn sample_stream(model: &McModel, seed: u64, stream: u64, samples: u64) -> McAccumulator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let norm = 1.0 / sqrt(model.n() as f64);
    let mut acc = McAccumulator::default();
    for _ in 0..samples {
        let (y, e1, e2) = model.draw(&mut rng);
        let (y, e1, e2) = (y * norm, e1 * norm, e2 * norm);
        let (r1, r2) = split_reward(y, e1, e2);
        acc.push(y, r1, r2);
    }
    acc
}

/// Estimates for A, B and the total reward from one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReport {
    pub a: RewardEstimate,
    pub b: RewardEstimate,
    pub total: RewardEstimate,
    pub seed: u64,
    pub streams: u32,
    pub partition_violations: u64,
}

/// Combines per-stream sums (in stream order) into a report.
pub fn finish(accumulators: &[McAccumulator], seed: u64) -> McReport {
    let mut acc = McAccumulator::default();
    for a in accumulators {
        acc.merge(a);
    }
    let n = acc.count as f64;
    let estimate = |sum: f64, sum_sq: f64| {
        let mean = sum / n;
        let var = if acc.count > 1 {
            ((sum_sq - sum * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        RewardEstimate {
            value: mean,
            method: Method::MonteCarlo,
            order_or_samples: acc.count,
            error_bound: sqrt(var / n),
            scale_applied: 1.0,
        }
    };
    McReport {
        a: estimate(acc.sum_r1, acc.sum_r1_sq),
        b: estimate(acc.sum_r2, acc.sum_r2_sq),
        total: estimate(acc.sum_abs_y, acc.sum_abs_y_sq),
        seed,
        streams: accumulators.len() as u32,
        partition_violations: acc.partition_violations,
    }
}

pub fn check_samples(samples: u64) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidConfig(alloc::format!(
            "samples must be at least {MIN_SAMPLES}, got {samples}"
        )));
    }
    Ok(())
}

/// Sequential Monte Carlo estimate over `streams` generator streams.
pub fn mc_reward(model: &McModel, samples: u64, seed: u64, streams: u32) -> Result<McReport> {
    check_samples(samples)?;
    let accs: Vec<McAccumulator> = stream_sizes(samples, streams)
        .into_iter()
        .enumerate()
        .map(|(s, count)| sample_stream(model, seed, s as u64, count))
        .collect();
    Ok(finish(&accs, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MEAN_ABS_NORMAL;

    #[test]
    fn split_partitions_reward() {
        assert_eq!(split_reward(-2.5, 0.1, 0.2), (2.5, 0.0));
        assert_eq!(split_reward(-2.5, 0.2, 0.2), (0.0, 2.5));
        assert_eq!(split_reward(1.0, -0.3, 0.2), (0.0, 1.0));
    }

    #[test]
    fn stream_split_covers_all_samples() {
        assert_eq!(stream_sizes(10, 3), alloc::vec![4, 3, 3]);
        assert_eq!(stream_sizes(5, 1), alloc::vec![5]);
    }

    #[test]
    fn rejects_small_sample_counts() {
        let regime = FeatureRegime::new(0.5, 0.5, 0.25).unwrap();
        let model =
            McModel::from_regime(&regime, &SymmetricStrategyPair::THEORETICAL, 100).unwrap();
        assert!(matches!(
            mc_reward(&model, 999, 1, 1),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn inconsistent_rounding_rejected() {
        // Half a feature each rounds up to one whole feature apiece, but
        // there is only one feature and no overlap.
        let regime = FeatureRegime::new(0.5, 0.5, 0.0).unwrap();
        let strat = SymmetricStrategyPair::THEORETICAL;
        assert!(matches!(
            McModel::from_regime(&regime, &strat, 1),
            Err(Error::InvalidRegime(_))
        ));
        let regime = FeatureRegime::new(0.2499999999996, 0.9, 0.2500000000004).unwrap();
        assert!(matches!(
            McModel::from_regime(&regime, &strat, 2),
            Err(Error::InvalidRegime(_))
        ));
        assert!(McModel::from_regime(&regime, &strat, 10_000).is_ok());
    }

    #[test]
    fn deterministic_and_balanced() {
        let regime = FeatureRegime::new(0.5, 0.5, 0.25).unwrap();
        let model = McModel::from_regime(
            &regime,
            &SymmetricStrategyPair::THEORETICAL,
            DEFAULT_FEATURES,
        )
        .unwrap();
        let a = mc_reward(&model, 200_000, 7, 4).unwrap();
        let b = mc_reward(&model, 200_000, 7, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.partition_violations, 0);
        assert!(fabs(a.a.value - MEAN_ABS_NORMAL / 2.0) < 3.0 * a.a.error_bound + 1e-3);
        assert!(fabs(a.total.value - MEAN_ABS_NORMAL) < 3.0 * a.total.error_bound);
        assert!(fabs(a.a.value + a.b.value - a.total.value) < 1e-12);
    }
}
