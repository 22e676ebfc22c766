//! Feature knowledge, strategies, and the normalized covariance of
//! `(y, e1, e2)` that every reward computation starts from.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use libm::{fabs, round, sqrt};

use crate::linalg::{self, Mat3};
use crate::{Error, Result};

const REGIME_TOL: f64 = 1e-12;
/// Eigenvalue floor for a matrix to count as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

/// Which of the `n` features each player observes. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSets {
    n: usize,
    s1: BTreeSet<usize>,
    s2: BTreeSet<usize>,
}

impl FeatureSets {
    pub fn new(
        n: usize,
        s1: impl IntoIterator<Item = usize>,
        s2: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel(
                "feature count n must be at least 1".into(),
            ));
        }
        let s1: BTreeSet<usize> = s1.into_iter().collect();
        let s2: BTreeSet<usize> = s2.into_iter().collect();
        for (name, set) in [("S1", &s1), ("S2", &s2)] {
            if let Some(&bad) = set.iter().find(|&&i| i == 0 || i > n) {
                return Err(Error::InvalidModel(format!(
                    "{name} contains index {bad}, outside 1..={n}"
                )));
            }
        }
        Ok(Self { n, s1, s2 })
    }

    /// Block layout used when realizing a fractional regime: the first
    /// `shared` indices are known to both, then A's unique block, then B's.
    pub fn from_counts(n: usize, only1: usize, shared: usize, only2: usize) -> Result<Self> {
        if only1 + shared + only2 > n {
            return Err(Error::InvalidRegime(format!(
                "block sizes {only1}+{shared}+{only2} exceed n = {n}"
            )));
        }
        let s1 = (1..=shared).chain(shared + 1..=shared + only1);
        let s2 = (1..=shared).chain(shared + only1 + 1..=shared + only1 + only2);
        Self::new(n, s1, s2)
    }

    /// Realizes a regime with `n` features, rounding each fraction to the
    /// nearest integer count.
    pub fn from_regime(regime: &FeatureRegime, n: usize) -> Result<Self> {
        let nf = n as f64;
        let k1 = round(regime.g1 * nf) as usize;
        let k2 = round(regime.g2 * nf) as usize;
        let k12 = round(regime.g12 * nf) as usize;
        if k12 > k1.min(k2) || k1 + k2 - k12 > n {
            return Err(Error::InvalidRegime(format!(
                "regime ({}, {}, {}) rounds to inconsistent counts |S1|={k1}, |S2|={k2}, |S1∩S2|={k12} at n={n}",
                regime.g1, regime.g2, regime.g12
            )));
        }
        Self::from_counts(n, k1 - k12, k12, k2 - k12)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s1(&self) -> &BTreeSet<usize> {
        &self.s1
    }

    pub fn s2(&self) -> &BTreeSet<usize> {
        &self.s2
    }

    pub fn shared(&self) -> impl Iterator<Item = usize> + '_ {
        self.s1.intersection(&self.s2).copied()
    }

    pub fn only1(&self) -> impl Iterator<Item = usize> + '_ {
        self.s1.difference(&self.s2).copied()
    }

    pub fn only2(&self) -> impl Iterator<Item = usize> + '_ {
        self.s2.difference(&self.s1).copied()
    }

    /// Knowledge fractions `(|S1|/n, |S2|/n, |S1∩S2|/n)`.
    pub fn regime(&self) -> FeatureRegime {
        let n = self.n as f64;
        FeatureRegime {
            g1: self.s1.len() as f64 / n,
            g2: self.s2.len() as f64 / n,
            g12: self.shared().count() as f64 / n,
        }
    }
}

/// Knowledge fractions of the linear knowledge regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRegime {
    g1: f64,
    g2: f64,
    g12: f64,
}

impl FeatureRegime {
    pub fn new(g1: f64, g2: f64, g12: f64) -> Result<Self> {
        let in_unit = |g: f64| (0.0..=1.0).contains(&g);
        if !(in_unit(g1) && in_unit(g2) && in_unit(g12)) {
            return Err(Error::InvalidRegime(format!(
                "fractions ({g1}, {g2}, {g12}) must lie in [0, 1]"
            )));
        }
        if g12 > g1.min(g2) + REGIME_TOL {
            return Err(Error::InvalidRegime(format!(
                "g12 = {g12} exceeds min(g1, g2) = {}",
                g1.min(g2)
            )));
        }
        if g12 < g1 + g2 - 1.0 - REGIME_TOL {
            return Err(Error::InvalidRegime(format!(
                "g12 = {g12} is below g1 + g2 - 1 = {}",
                g1 + g2 - 1.0
            )));
        }
        Ok(Self { g1, g2, g12 })
    }

    pub fn g1(&self) -> f64 {
        self.g1
    }

    pub fn g2(&self) -> f64 {
        self.g2
    }

    pub fn g12(&self) -> f64 {
        self.g12
    }

    /// The same features seen from B's side.
    pub fn swapped(&self) -> Self {
        Self {
            g1: self.g2,
            g2: self.g1,
            g12: self.g12,
        }
    }
}

/// Per-feature coefficients for both players.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralStrategyPair {
    pub alpha1: BTreeMap<usize, f64>,
    pub alpha2: BTreeMap<usize, f64>,
}

impl GeneralStrategyPair {
    pub fn new(alpha1: BTreeMap<usize, f64>, alpha2: BTreeMap<usize, f64>) -> Self {
        Self { alpha1, alpha2 }
    }

    /// Both players fit their maximum-likelihood model (all coefficients 1).
    pub fn theoretical(sets: &FeatureSets) -> Self {
        Self {
            alpha1: sets.s1.iter().map(|&i| (i, 1.0)).collect(),
            alpha2: sets.s2.iter().map(|&i| (i, 1.0)).collect(),
        }
    }

    /// Expands block coefficients onto explicit features.
    pub fn from_symmetric(sets: &FeatureSets, strat: &SymmetricStrategyPair) -> Self {
        let alpha1 = sets
            .s1
            .iter()
            .map(|&i| {
                (
                    i,
                    if sets.s2.contains(&i) {
                        strat.a12
                    } else {
                        strat.a11
                    },
                )
            })
            .collect();
        let alpha2 = sets
            .s2
            .iter()
            .map(|&i| {
                (
                    i,
                    if sets.s1.contains(&i) {
                        strat.a22
                    } else {
                        strat.a21
                    },
                )
            })
            .collect();
        Self { alpha1, alpha2 }
    }

    pub fn validate(&self, sets: &FeatureSets) -> Result<()> {
        if !self.alpha1.keys().copied().eq(sets.s1.iter().copied()) {
            return Err(Error::InvalidStrategy(
                "A's coefficient indices must equal S1 exactly".into(),
            ));
        }
        if !self.alpha2.keys().copied().eq(sets.s2.iter().copied()) {
            return Err(Error::InvalidStrategy(
                "B's coefficient indices must equal S2 exactly".into(),
            ));
        }
        if self
            .alpha1
            .values()
            .chain(self.alpha2.values())
            .any(|a| !a.is_finite())
        {
            return Err(Error::InvalidStrategy("coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Block-constant coefficients: A uses `a11` on its unique features and
/// `a12` on shared ones; B uses `a21` on its unique features and `a22` on
/// shared ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricStrategyPair {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl SymmetricStrategyPair {
    pub const THEORETICAL: Self = Self {
        a11: 1.0,
        a12: 1.0,
        a21: 1.0,
        a22: 1.0,
    };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub fn from_blocks(a1: [f64; 2], a2: [f64; 2]) -> Self {
        Self {
            a11: a1[0],
            a12: a1[1],
            a21: a2[0],
            a22: a2[1],
        }
    }

    pub fn a1(&self) -> [f64; 2] {
        [self.a11, self.a12]
    }

    pub fn a2(&self) -> [f64; 2] {
        [self.a21, self.a22]
    }

    /// B's strategy in A's seat and vice versa.
    pub fn swapped(&self) -> Self {
        Self {
            a11: self.a21,
            a12: self.a22,
            a21: self.a11,
            a22: self.a12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.a11, self.a12, self.a21, self.a22]
            .iter()
            .all(|a| a.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidStrategy("coefficients must be finite".into()))
        }
    }
}

/// Covariance of `(y, e1, e2)` divided by `n`, so that `var(y) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameCovariance {
    matrix: Mat3,
    scale: f64,
}

impl GameCovariance {
    /// Builds and validates a covariance from its five free entries.
    pub fn new(v01: f64, v02: f64, v11: f64, v12: f64, v22: f64, scale: f64) -> Result<Self> {
        let cov = Self::from_entries(v01, v02, v11, v12, v22, scale);
        cov.check_psd()?;
        Ok(cov)
    }

    pub(crate) fn from_entries(
        v01: f64,
        v02: f64,
        v11: f64,
        v12: f64,
        v22: f64,
        scale: f64,
    ) -> Self {
        Self {
            matrix: [[1.0, v01, v02], [v01, v11, v12], [v02, v12, v22]],
            scale,
        }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    /// The feature count divided out of the raw covariance.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn v01(&self) -> f64 {
        self.matrix[0][1]
    }

    pub fn v02(&self) -> f64 {
        self.matrix[0][2]
    }

    pub fn v11(&self) -> f64 {
        self.matrix[1][1]
    }

    pub fn v12(&self) -> f64 {
        self.matrix[1][2]
    }

    pub fn v22(&self) -> f64 {
        self.matrix[2][2]
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::symmetric_eigen3(&self.matrix)?.0[0])
    }

    pub fn check_psd(&self) -> Result<()> {
        if self.matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(
                "covariance has non-finite entries".into(),
            ));
        }
        let min_eigenvalue = self.min_eigenvalue()?;
        if min_eigenvalue < -PSD_TOL {
            return Err(Error::NotPsd { min_eigenvalue });
        }
        Ok(())
    }

    /// Same covariance with the two error coordinates exchanged.
    pub fn swapped(&self) -> Self {
        Self::from_entries(
            self.v02(),
            self.v01(),
            self.v22(),
            self.v12(),
            self.v11(),
            self.scale,
        )
    }

    pub fn max_abs_diff(&self, other: &GameCovariance) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    /// Correlation-type bounds `|v12| <= sqrt(v11 v22)` etc. with slack `tol`.
    pub fn satisfies_cauchy_schwarz(&self, tol: f64) -> bool {
        self.v11() >= 0.0
            && self.v22() >= 0.0
            && fabs(self.v12()) <= sqrt(self.v11() * self.v22()) + tol
            && fabs(self.v01()) <= sqrt(self.v11()) + tol
            && fabs(self.v02()) <= sqrt(self.v22()) + tol
    }
}

/// Covariance of `(y, e1, e2)` for arbitrary per-feature coefficients.
pub fn build_covariance_general(
    sets: &FeatureSets,
    strat: &GeneralStrategyPair,
) -> Result<GameCovariance> {
    strat.validate(sets)?;
    let residual1 = |i: usize| 1.0 - strat.alpha1[&i];
    let residual2 = |i: usize| 1.0 - strat.alpha2[&i];

    let unseen1 = (sets.n - sets.s1.len()) as f64;
    let unseen2 = (sets.n - sets.s2.len()) as f64;
    let unseen_both = (sets.n - sets.s1.union(&sets.s2).count()) as f64;

    let v01 = unseen1 + sets.s1.iter().map(|&i| residual1(i)).sum::<f64>();
    let v11 = unseen1 + sets.s1.iter().map(|&i| sq(residual1(i))).sum::<f64>();
    let v02 = unseen2 + sets.s2.iter().map(|&i| residual2(i)).sum::<f64>();
    let v22 = unseen2 + sets.s2.iter().map(|&i| sq(residual2(i))).sum::<f64>();
    let v12 = unseen_both
        + sets.only2().map(residual2).sum::<f64>()
        + sets.only1().map(residual1).sum::<f64>()
        + sets
            .shared()
            .map(|i| residual1(i) * residual2(i))
            .sum::<f64>();

    let n = sets.n as f64;
    Ok(GameCovariance::from_entries(
        v01 / n,
        v02 / n,
        v11 / n,
        v12 / n,
        v22 / n,
        n,
    ))
}

/// Covariance of `(y, e1, e2)` for block-constant strategies, already
/// normalized by `n`.
pub fn build_covariance_symmetric(
    regime: &FeatureRegime,
    strat: &SymmetricStrategyPair,
) -> Result<GameCovariance> {
    strat.validate()?;
    Ok(symmetric_unchecked(regime.g1, regime.g2, regime.g12, strat))
}

/// Block formulas without validation, for inputs already checked.
pub(crate) fn symmetric_unchecked(
    g1: f64,
    g2: f64,
    g12: f64,
    s: &SymmetricStrategyPair,
) -> GameCovariance {
    let only1 = g1 - g12;
    let only2 = g2 - g12;
    let r11 = 1.0 - s.a11;
    let r12 = 1.0 - s.a12;
    let r21 = 1.0 - s.a21;
    let r22 = 1.0 - s.a22;
    let v01 = (1.0 - g1) + r11 * only1 + r12 * g12;
    let v02 = (1.0 - g2) + r21 * only2 + r22 * g12;
    let v12 = (1.0 - g1 - g2 + g12) + r11 * only1 + r21 * only2 + r12 * r22 * g12;
    let v11 = (1.0 - g1) + sq(r11) * only1 + sq(r12) * g12;
    let v22 = (1.0 - g2) + sq(r21) * only2 + sq(r22) * g12;
    GameCovariance::from_entries(v01, v02, v11, v12, v22, 1.0)
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

/// Result of building the same covariance through both builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceComparison {
    pub general: GameCovariance,
    pub symmetric: GameCovariance,
    pub max_deviation: f64,
}

/// Expands a block strategy onto explicit sets and compares the general
/// builder against the regime-level formulas.
pub fn consistency_check(
    sets: &FeatureSets,
    strat: &SymmetricStrategyPair,
) -> Result<CovarianceComparison> {
    let general =
        build_covariance_general(sets, &GeneralStrategyPair::from_symmetric(sets, strat))?;
    let symmetric = build_covariance_symmetric(&sets.regime(), strat)?;
    Ok(CovarianceComparison {
        general,
        symmetric,
        max_deviation: general.max_abs_diff(&symmetric),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_ones(sets: &FeatureSets) -> GeneralStrategyPair {
        GeneralStrategyPair::theoretical(sets)
    }

    fn assert_matrix(cov: &GameCovariance, expected: Mat3, tol: f64) {
        assert!(
            linalg::max_abs_diff(cov.matrix(), &expected) <= tol,
            "{:?} != {:?}",
            cov.matrix(),
            expected
        );
    }

    #[test]
    fn general_four_feature_example() {
        let sets = FeatureSets::new(4, [1, 2], [2, 3, 4]).unwrap();
        let cov = build_covariance_general(&sets, &all_ones(&sets)).unwrap();
        assert_matrix(
            &cov,
            [[1.0, 0.5, 0.25], [0.5, 0.5, 0.0], [0.25, 0.0, 0.25]],
            0.0,
        );
        assert_eq!(cov.scale(), 4.0);
    }

    #[test]
    fn general_perfect_models() {
        let sets = FeatureSets::new(3, [1, 2, 3], [1, 2, 3]).unwrap();
        let cov = build_covariance_general(&sets, &all_ones(&sets)).unwrap();
        assert_matrix(&cov, [[1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]], 0.0);
    }

    #[test]
    fn general_disjoint_hand_values() {
        let sets = FeatureSets::new(2, [1], [2]).unwrap();
        let strat = GeneralStrategyPair::new([(1, 2.0)].into(), [(2, 0.0)].into());
        let cov = build_covariance_general(&sets, &strat).unwrap();
        assert_eq!(cov.v01(), 0.0);
        assert_eq!(cov.v11(), 1.0);
        assert_eq!(cov.v02(), 1.0);
        assert_eq!(cov.v22(), 1.0);
        assert_eq!(cov.v12(), 0.0);
    }

    #[test]
    fn general_rejects_bad_inputs() {
        assert!(matches!(
            FeatureSets::new(0, [], []),
            Err(Error::InvalidModel(_))
        ));
        assert!(matches!(
            FeatureSets::new(3, [4], [1]),
            Err(Error::InvalidModel(_))
        ));
        let sets = FeatureSets::new(3, [1, 2], [3]).unwrap();
        let strat = GeneralStrategyPair::new([(1, 1.0)].into(), [(3, 1.0)].into());
        assert!(matches!(
            build_covariance_general(&sets, &strat),
            Err(Error::InvalidStrategy(_))
        ));
    }

    #[test]
    fn symmetric_theoretical_entries() {
        let regime = FeatureRegime::new(0.3, 0.6, 0.18).unwrap();
        let cov = build_covariance_symmetric(&regime, &SymmetricStrategyPair::THEORETICAL).unwrap();
        for (got, want) in [
            (cov.v01(), 0.7),
            (cov.v11(), 0.7),
            (cov.v02(), 0.4),
            (cov.v22(), 0.4),
            (cov.v12(), 0.28),
        ] {
            assert!(fabs(got - want) < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn symmetric_identical_sets() {
        let regime = FeatureRegime::new(0.5, 0.5, 0.5).unwrap();
        let cov =
            build_covariance_symmetric(&regime, &SymmetricStrategyPair::new(7.0, 1.0, -3.0, 1.0))
                .unwrap();
        for v in [cov.v01(), cov.v02(), cov.v11(), cov.v12(), cov.v22()] {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn symmetric_zero_predictions() {
        let regime = FeatureRegime::new(0.4, 0.7, 0.2).unwrap();
        let cov =
            build_covariance_symmetric(&regime, &SymmetricStrategyPair::new(0.0, 0.0, 0.0, 0.0))
                .unwrap();
        for v in [cov.v01(), cov.v02(), cov.v11(), cov.v12(), cov.v22()] {
            assert!(fabs(v - 1.0) < 1e-15);
        }
    }

    #[test]
    fn regime_validation() {
        assert!(FeatureRegime::new(0.3, 0.4, 0.5).is_err());
        assert!(FeatureRegime::new(0.8, 0.7, 0.4).is_err());
        assert!(FeatureRegime::new(1.2, 0.7, 0.4).is_err());
        assert!(FeatureRegime::new(0.8, 0.7, 0.5).is_ok());
    }

    #[test]
    fn consistency_examples() {
        let sets = FeatureSets::from_counts(10, 1, 2, 4).unwrap();
        assert_eq!(sets.s1().len(), 3);
        assert_eq!(sets.s2().len(), 6);
        let cmp =
            consistency_check(&sets, &SymmetricStrategyPair::new(1.5, 2.0, 0.8, 1.1)).unwrap();
        assert!(cmp.max_deviation < 1e-12);

        let sets = FeatureSets::new(4, [1, 2], [2, 3, 4]).unwrap();
        let cmp = consistency_check(&sets, &SymmetricStrategyPair::THEORETICAL).unwrap();
        assert!(cmp.max_deviation < 1e-12);
        assert_matrix(
            &cmp.symmetric,
            [[1.0, 0.5, 0.25], [0.5, 0.5, 0.0], [0.25, 0.0, 0.25]],
            1e-15,
        );

        let sets = FeatureSets::from_counts(8, 3, 0, 2).unwrap();
        let cmp =
            consistency_check(&sets, &SymmetricStrategyPair::new(0.4, 99.0, 1.7, -42.0)).unwrap();
        assert!(cmp.max_deviation < 1e-12);
    }

    #[test]
    fn regime_rounding() {
        let regime = FeatureRegime::new(0.3, 0.6, 0.18).unwrap();
        let sets = FeatureSets::from_regime(&regime, 10_000).unwrap();
        assert_eq!(sets.s1().len(), 3000);
        assert_eq!(sets.s2().len(), 6000);
        assert_eq!(sets.shared().count(), 1800);
    }
}
