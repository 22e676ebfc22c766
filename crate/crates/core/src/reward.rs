//! Expected rewards through the covariance/cubature route.

use libm::sqrt;

use crate::cubature::{self, GatedValue, Indicator};
use crate::model::{
    build_covariance_general, build_covariance_symmetric, FeatureRegime, FeatureSets,
    GeneralStrategyPair, SymmetricStrategyPair,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Cubature,
    MonteCarlo,
    ExactEnumeration,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cubature => "cubature",
            Method::MonteCarlo => "monte-carlo",
            Method::ExactEnumeration => "exact-enumeration",
        }
    }
}

/// A reward value and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardEstimate {
    /// Normalized reward `U`, or `sqrt(n) U` once [`absolute`](Self::absolute) is applied.
    pub value: f64,
    pub method: Method,
    /// Cubature order, or Monte Carlo sample count.
    pub order_or_samples: u64,
    /// Convergence gap, standard error, or 0 for exact values.
    pub error_bound: f64,
    pub scale_applied: f64,
}

impl RewardEstimate {
    fn from_gated(g: GatedValue) -> Self {
        Self {
            value: g.value,
            method: Method::Cubature,
            order_or_samples: g.order as u64,
            error_bound: g.gap,
            scale_applied: 1.0,
        }
    }

    /// Rescales a normalized reward to absolute units for `n` features.
    ///
    /// `E|y| = sqrt(2n/π)`, so the multiplier is `sqrt(n)`.
    pub fn absolute(self, n: f64) -> Self {
        let k = sqrt(n);
        Self {
            value: self.value * k,
            error_bound: self.error_bound * k,
            scale_applied: self.scale_applied * k,
            ..self
        }
    }
}

/// Normalized reward `U_g(a1, a2)` of player A for block strategies.
pub fn reward_symmetric(
    regime: &FeatureRegime,
    strat: &SymmetricStrategyPair,
    m: usize,
) -> Result<RewardEstimate> {
    check_order(m)?;
    let sigma = build_covariance_symmetric(regime, strat)?;
    Ok(RewardEstimate::from_gated(cubature::expect_gated(
        &sigma,
        m,
        Indicator::AWins,
    )?))
}

/// Normalized reward of player A for per-feature strategies. Multiply by
/// `sqrt(n)` (see [`RewardEstimate::absolute`]) for the absolute reward.
pub fn reward_general(
    sets: &FeatureSets,
    strat: &GeneralStrategyPair,
    m: usize,
) -> Result<RewardEstimate> {
    check_order(m)?;
    let sigma = build_covariance_general(sets, strat)?;
    Ok(RewardEstimate::from_gated(cubature::expect_gated(
        &sigma,
        m,
        Indicator::AWins,
    )?))
}

/// Both players' normalized rewards and their total, evaluated on one grid
/// with complementary indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSplit {
    pub a: f64,
    pub b: f64,
    /// Grid value of `E|x1|`.
    pub total: f64,
    pub order: usize,
}

pub fn reward_split(
    regime: &FeatureRegime,
    strat: &SymmetricStrategyPair,
    m: usize,
) -> Result<RewardSplit> {
    let sigma = build_covariance_symmetric(regime, strat)?;
    let integrator = cubature::Integrator::new(m)?;
    let grid = integrator.grid(&sigma)?;
    Ok(RewardSplit {
        a: grid.expectation(Indicator::AWins),
        b: grid.expectation(Indicator::BWins),
        total: grid.expectation(Indicator::Always),
        order: m,
    })
}

fn check_order(m: usize) -> Result<()> {
    if m == 0 || m > cubature::MAX_ORDER {
        Err(Error::InvalidOrder(m))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::MEAN_ABS_NORMAL;
    use libm::fabs;

    #[test]
    fn equal_players_split_evenly() {
        let regime = FeatureRegime::new(0.5, 0.5, 0.25).unwrap();
        let r = reward_symmetric(&regime, &SymmetricStrategyPair::THEORETICAL, 60).unwrap();
        assert!(fabs(r.value - MEAN_ABS_NORMAL / 2.0) < 5e-3, "{}", r.value);
        assert_eq!(r.method, Method::Cubature);
    }

    #[test]
    fn omniscient_a_takes_everything() {
        let regime = FeatureRegime::new(1.0, 0.4, 0.4).unwrap();
        let r = reward_symmetric(&regime, &SymmetricStrategyPair::THEORETICAL, 60).unwrap();
        assert!(fabs(r.value - MEAN_ABS_NORMAL) < 5e-3, "{}", r.value);
    }

    #[test]
    fn identical_models_tie_to_b() {
        let regime = FeatureRegime::new(0.5, 0.5, 0.5).unwrap();
        let r = reward_symmetric(
            &regime,
            &SymmetricStrategyPair::new(3.0, 1.0, -1.0, 1.0),
            60,
        )
        .unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn general_identical_coefficients_give_zero() {
        let sets = FeatureSets::new(5, [1, 3, 4], [1, 3, 4]).unwrap();
        let alpha: alloc::collections::BTreeMap<usize, f64> =
            [(1, 0.7), (3, 2.2), (4, -0.4)].into();
        let strat = GeneralStrategyPair::new(alpha.clone(), alpha);
        assert_eq!(reward_general(&sets, &strat, 40).unwrap().value, 0.0);
    }

    #[test]
    fn general_perfect_a_against_silent_b() {
        let sets = FeatureSets::new(3, [1, 2, 3], [2]).unwrap();
        let strat =
            GeneralStrategyPair::new([(1, 1.0), (2, 1.0), (3, 1.0)].into(), [(2, 0.0)].into());
        let r = reward_general(&sets, &strat, 60).unwrap();
        assert!(
            r.value > 0.79 && r.value <= MEAN_ABS_NORMAL + 5e-3,
            "{}",
            r.value
        );
        let abs = r.absolute(3.0);
        assert!(fabs(abs.value - r.value * sqrt(3.0)) < 1e-15);
    }

    #[test]
    fn split_sums_to_total() {
        let regime = FeatureRegime::new(0.3, 0.7, 0.21).unwrap();
        let s = reward_split(&regime, &SymmetricStrategyPair::new(1.8, 1.3, 0.9, 1.1), 60).unwrap();
        assert!(fabs(s.a + s.b - s.total) < 1e-14);
        assert!(fabs(s.total - MEAN_ABS_NORMAL) < 5e-3);
    }
}
