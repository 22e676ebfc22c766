//! Gauss-Hermite cubature for `E[|x1| 1(|x2| < |x3|)]` under a trivariate
//! normal with covariance `Σ`.
//!
//! The Hermite rule is the probabilists' one: nodes are the roots of `He_m`
//! and the weights integrate against the standard normal density, so they
//! sum to 1. The literal product-rule points are `T = L (ζ_i, ζ_j, ζ_k)` with
//! `L Lᵀ = Σ` and weight `w_i w_j w_k`; rewards are evaluated by
//! [`CubatureGrid::expectation`], which integrates the same expectation
//! without the discontinuity landing on grid points.

use alloc::vec::Vec;
use libm::{fabs, sqrt};

use crate::linalg::{self, Mat3};
use crate::model::GameCovariance;
use crate::{Error, Result};

pub const MAX_ORDER: usize = 512;
pub const DEFAULT_ORDER: usize = 60;
/// Order used when the default order fails the convergence gate.
pub const ESCALATED_ORDER: usize = 120;
/// Orders compared by the convergence gate differ by this much.
pub const GATE_STEP: usize = 12;
pub const GATE_TOL: f64 = 1e-3;

/// Pivots at or below this are treated as exact zeros by the factorization.
const PIVOT_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted (and clamped) by the eigen fallback.
const NEGATIVE_EIGEN_TOL: f64 = 1e-8;
const RECONSTRUCTION_TOL: f64 = 1e-9;

/// An `m`-point Gauss-Hermite rule against the standard normal density.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds the `m`-point probabilists' Gauss-Hermite rule.
///
/// Nodes start from the eigenvalues of the Jacobi matrix (zero diagonal,
/// off-diagonal `sqrt(k)`), are polished by Newton steps on the orthonormal
/// Hermite recurrence, and are then made exactly symmetric. Weights come from
/// `w_i = m! / (m² He_{m-1}(ζ_i)²)`, evaluated as `1 / (m p_{m-1}(ζ_i)²)`
/// with `p_k = He_k / sqrt(k!)`, and are renormalized to sum to one.
///
/// For very large `m` the outermost weights are below the smallest `f64`
/// and come out as zero.
pub fn hermite_rule(m: usize) -> Result<HermiteRule> {
    if m == 0 || m > MAX_ORDER {
        return Err(Error::InvalidOrder(m));
    }
    let off: Vec<f64> = (1..m).map(|k| sqrt(k as f64)).collect();
    let mut nodes = linalg::tridiagonal_eigenvalues(&alloc::vec![0.0; m], &off)?;

    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let (pm, pm1) = orthonormal_hermite(m, *x);
            if pm1 == 0.0 || !pm.is_finite() || !pm1.is_finite() {
                break;
            }
            let step = pm / (sqrt(m as f64) * pm1);
            *x -= step;
            if fabs(step) <= 1e-16 * fabs(*x).max(1.0) {
                break;
            }
        }
    }
    nodes.sort_by(f64::total_cmp);
    for i in 0..m / 2 {
        let half = 0.5 * (nodes[m - 1 - i] - nodes[i]);
        nodes[i] = -half;
        nodes[m - 1 - i] = half;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (_, pm1) = orthonormal_hermite(m, x);
            let w = 1.0 / (m as f64 * pm1 * pm1);
            if w.is_finite() {
                w
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NumericalFailure(alloc::format!(
            "Hermite weights for m = {m} do not normalize"
        )));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(HermiteRule::from_parts(nodes, weights))
}

/// `(p_m(x), p_{m-1}(x))` for the orthonormal probabilists' Hermite family.
fn orthonormal_hermite(m: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..m {
        // p_{k+1} = (x p_k - sqrt(k) p_{k-1}) / sqrt(k+1)
        let next = (x * cur - sqrt(k as f64) * prev) / sqrt((k + 1) as f64);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// Gauss rule for the orthonormal family with recurrence
/// `x p_k = b_{k+1} p_{k+1} + a_k p_k + b_k p_{k-1}`; `b` holds `b_1..b_{n-1}`.
/// Weights are Christoffel numbers normalized to sum to one.
fn gauss_rule(a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.len();
    let mut nodes = linalg::tridiagonal_eigenvalues(a, b)?;
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let (q, dq, _) = orthonormal_eval(a, b, *x);
            if dq == 0.0 || !q.is_finite() || !dq.is_finite() {
                break;
            }
            let step = q / dq;
            *x -= step;
            if fabs(step) <= 1e-16 * fabs(*x).max(1.0) {
                break;
            }
        }
    }
    nodes.sort_by(f64::total_cmp);
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let w = 1.0 / orthonormal_eval(a, b, x).2;
            if w.is_finite() {
                w
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NumericalFailure(alloc::format!(
            "Gauss rule with {n} points failed"
        )));
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok((nodes, weights))
}

/// `(q(x), q'(x), Σ_{k<n} p_k(x)²)` where `q = (x - a_{n-1}) p_{n-1} - b_{n-1} p_{n-2}`
/// is a multiple of `p_n`.
fn orthonormal_eval(a: &[f64], b: &[f64], x: f64) -> (f64, f64, f64) {
    let n = a.len();
    let (mut prev, mut cur) = (0.0, 1.0);
    let (mut dprev, mut dcur) = (0.0, 0.0);
    let mut christoffel = 0.0;
    for k in 0..n {
        christoffel += cur * cur;
        let bk = if k == 0 { 0.0 } else { b[k - 1] };
        let scale = if k + 1 < n { b[k] } else { 1.0 };
        let next = ((x - a[k]) * cur - bk * prev) / scale;
        let dnext = ((x - a[k]) * dcur + cur - bk * dprev) / scale;
        prev = cur;
        cur = next;
        dprev = dcur;
        dcur = dnext;
    }
    (cur, dcur, christoffel)
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`, weights summing to 1.
fn legendre_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let b: Vec<f64> = (1..n)
        .map(|k| k as f64 / sqrt((4 * k * k - 1) as f64))
        .collect();
    gauss_rule(&alloc::vec![0.0; n], &b)
}

/// Angular rule for a standard bivariate normal written in polar form,
/// `(ζ1, ζ2) = r (cos θ, sin θ)`.
///
/// Gauss-Legendre points are placed on each arc between caller-supplied
/// breakpoints, so kinks and jumps along rays through the origin never fall
/// inside an arc.
#[derive(Debug, Clone, PartialEq)]
struct AngularRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl AngularRule {
    fn new(m: usize) -> Result<Self> {
        let (nodes, weights) = legendre_rule(m.div_ceil(2))?;
        Ok(Self { nodes, weights })
    }

    /// `(1/π) ∫_0^π f(θ) dθ`; `breaks` lie in `(0, π)` and are sorted.
    fn integrate(&self, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        let pi = core::f64::consts::PI;
        let mut acc = 0.0;
        let mut lo = 0.0;
        for &hi in breaks.iter().chain(core::iter::once(&pi)) {
            if hi > lo {
                let half = 0.5 * (hi - lo);
                let mid = 0.5 * (hi + lo);
                let arc: f64 = self
                    .nodes
                    .iter()
                    .zip(&self.weights)
                    .map(|(&x, &w)| w * f(mid + half * x))
                    .sum();
                // Legendre weights sum to 1 over a width-2 interval
                acc += 2.0 * half * arc;
                lo = hi;
            }
        }
        acc / pi
    }
}

/// `∫_0^∞ r² e^{-r²/2} dr`
const RADIAL_MASS: f64 = 1.253_314_137_315_500_3;

/// `∫_0^∞ r² e^{-r²/2} (Φ(k_hi r) - Φ(k_lo r)) dr` for `k_lo <= k_hi`.
///
/// Differentiating `∫ r² e^{-r²/2} Φ(k r) dr` in `k` gives
/// `(2π)^{-1/2} 2 / (1 + k²)²`, whose antiderivative is
/// `(2π)^{-1/2} (k / (1 + k²) + atan k)`.
fn radial_window(k_lo: f64, k_hi: f64) -> f64 {
    let g = |k: f64| {
        let rational = if fabs(k) > 1e150 {
            1.0 / k
        } else {
            k / (1.0 + k * k)
        };
        rational + libm::atan(k)
    };
    let inv_sqrt_2pi = 0.398_942_280_401_432_7;
    (inv_sqrt_2pi * (g(k_hi) - g(k_lo))).clamp(0.0, RADIAL_MASS)
}

/// Angle in `[0, π)` of the ray where `a cos θ + b sin θ` changes sign.
fn sign_change_angle(a: f64, b: f64) -> Option<f64> {
    if a == 0.0 && b == 0.0 {
        return None;
    }
    let pi = core::f64::consts::PI;
    let mut theta = libm::atan2(-a, b);
    while theta < 0.0 {
        theta += pi;
    }
    while theta >= pi {
        theta -= pi;
    }
    Some(theta)
}

impl HermiteRule {
    fn from_parts(nodes: Vec<f64>, weights: Vec<f64>) -> Self {
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w_i f(ζ_i)`
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorMethod {
    /// Triangular factorization with zero-pivot handling.
    Cholesky,
    /// Clamped eigen square root, re-triangularized.
    Eigen,
}

/// A lower-triangular `L` with `L Lᵀ = Σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    l: Mat3,
    method: FactorMethod,
}

impl Factor {
    /// Wraps an arbitrary factor. Grids built from a non-triangular factor
    /// fall back to the plain triple sum.
    pub fn from_matrix(l: Mat3) -> Self {
        Self {
            l,
            method: FactorMethod::Cholesky,
        }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.l
    }

    pub fn method(&self) -> FactorMethod {
        self.method
    }

    pub fn reconstruct(&self) -> Mat3 {
        linalg::outer_self(&self.l)
    }

    /// Flips the sign of one column; `L Lᵀ` is unchanged.
    pub fn negate_column(&self, col: usize) -> Self {
        let mut l = self.l;
        for row in l.iter_mut() {
            row[col] = -row[col];
        }
        Self {
            l,
            method: self.method,
        }
    }
}

/// Square root of a (possibly singular) covariance.
///
/// Tries a triangular factorization first. A row identical to an earlier row
/// reuses that row's factor, so perfectly duplicated variables stay bitwise
/// identical on the grid. If the triangular route fails, the symmetric eigen
/// square root is taken with eigenvalues above `-1e-8` clamped to zero.
pub fn psd_sqrt(sigma: &GameCovariance) -> Result<Factor> {
    let a = sigma.matrix();
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure(
            "covariance has non-finite entries".into(),
        ));
    }
    if let Some(l) = semidefinite_cholesky(a) {
        if linalg::max_abs_diff(&linalg::outer_self(&l), a) <= RECONSTRUCTION_TOL {
            return Ok(Factor {
                l,
                method: FactorMethod::Cholesky,
            });
        }
    }
    let (values, vectors) = linalg::symmetric_eigen3(a)?;
    if values[0] < -NEGATIVE_EIGEN_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: values[0],
        });
    }
    let mut f = [[0.0; 3]; 3];
    for (col, &lambda) in values.iter().enumerate() {
        let root = sqrt(lambda.max(0.0));
        for row in 0..3 {
            f[row][col] = vectors[row][col] * root;
        }
    }
    let l = linalg::lower_from_factor(&f);
    if linalg::max_abs_diff(&linalg::outer_self(&l), a) > RECONSTRUCTION_TOL {
        return Err(Error::NumericalFailure(
            "eigen square root does not reproduce the covariance".into(),
        ));
    }
    Ok(Factor {
        l,
        method: FactorMethod::Eigen,
    })
}

fn semidefinite_cholesky(a: &Mat3) -> Option<Mat3> {
    let mut l = [[0.0; 3]; 3];
    for j in 0..3 {
        if let Some(i) = (0..j).find(|&i| a[i] == a[j]) {
            l[j] = l[i];
            continue;
        }
        let pivot = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if pivot > PIVOT_TOL {
            let root = sqrt(pivot);
            l[j][j] = root;
            for r in j + 1..3 {
                let dot: f64 = (0..j).map(|k| l[r][k] * l[j][k]).sum();
                l[r][j] = (a[r][j] - dot) / root;
            }
        } else if pivot < -NEGATIVE_EIGEN_TOL {
            return None;
        } else {
            for r in j + 1..3 {
                let dot: f64 = (0..j).map(|k| l[r][k] * l[j][k]).sum();
                if fabs(a[r][j] - dot) > RECONSTRUCTION_TOL {
                    return None;
                }
            }
        }
    }
    Some(l)
}

/// Which part of the reward integrand to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indicator {
    /// `|x1| 1(|x2| < |x3|)`: A's reward.
    AWins,
    /// `|x1| 1(|x2| >= |x3|)`: B's reward, ties included.
    BWins,
    /// `|x1|` alone: the total reward.
    Always,
}

impl Indicator {
    #[inline]
    pub fn holds(self, x2: f64, x3: f64) -> bool {
        match self {
            Indicator::AWins => fabs(x2) < fabs(x3),
            Indicator::BWins => fabs(x2) >= fabs(x3),
            Indicator::Always => true,
        }
    }
}

/// Tensor-product grid `T = L Z` over a Hermite rule. Points are streamed,
/// never stored.
#[derive(Debug, Clone, Copy)]
pub struct CubatureGrid<'a> {
    integrator: &'a Integrator,
    factor: Factor,
}

impl<'a> CubatureGrid<'a> {
    pub fn new(integrator: &'a Integrator, factor: Factor) -> Self {
        Self { integrator, factor }
    }

    pub fn rule(&self) -> &HermiteRule {
        &self.integrator.rule
    }

    pub fn factor(&self) -> &Factor {
        &self.factor
    }

    /// Visits every point `T^(ijk)` with its weight, in `(i, j, k)` order.
    pub fn for_each_point(&self, mut visit: impl FnMut([f64; 3], f64)) {
        let l = &self.factor.l;
        let z = self.rule().nodes();
        let w = self.rule().weights();
        for (&zi, &wi) in z.iter().zip(w) {
            for (&zj, &wj) in z.iter().zip(w) {
                let wij = wi * wj;
                for (&zk, &wk) in z.iter().zip(w) {
                    let t = [
                        (l[0][0] * zi + l[0][1] * zj) + l[0][2] * zk,
                        (l[1][0] * zi + l[1][1] * zj) + l[1][2] * zk,
                        (l[2][0] * zi + l[2][1] * zj) + l[2][2] * zk,
                    ];
                    visit(t, wij * wk);
                }
            }
        }
    }

    /// Literal `m³` product-rule sum of `W |T1| 1(...)`. Kept as a reference;
    /// see [`expectation`](Self::expectation) for why it is not the default.
    pub fn triple_sum(&self, indicator: Indicator) -> f64 {
        let mut acc = 0.0;
        self.for_each_point(|t, w| {
            if indicator.holds(t[1], t[2]) {
                acc += w * fabs(t[0]);
            }
        });
        acc
    }

    /// Sum of all grid weights.
    pub fn total_mass(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_point(|_, w| acc += w);
        acc
    }

    /// `E[|x1| 1(...)]` with `L` lower triangular, so that `x1 = L00 ζ1`,
    /// `x2` depends on `(ζ1, ζ2)` only and `x3 = c + L22 ζ3`.
    ///
    /// In polar form `x1`, `x2` and `c` are `r` times functions of the angle.
    /// Given the angle, the `ζ3` and `r` integrals have a closed form (see
    /// [`radial_window`]), which leaves a one-dimensional angular integral
    /// that is smooth between the rays where `x1` or `x2` change sign or
    /// `|c| = |x2|`; those rays become arc breakpoints. The literal product
    /// rule instead puts point masses on a node grid that is symmetric about
    /// 0, so `|T2| = |T3|` happens with positive weight and all of it goes
    /// to B. When `L22 = 0` the comparison is deterministic and ties still
    /// go to B.
    pub fn expectation(&self, indicator: Indicator) -> f64 {
        let l = &self.factor.l;
        debug_assert!(linalg::is_lower_triangular(l));
        let mut breaks: Vec<f64> = [
            sign_change_angle(l[0][0], 0.0),
            sign_change_angle(l[1][0], l[1][1]),
            sign_change_angle(l[2][0] - l[1][0], l[2][1] - l[1][1]),
            sign_change_angle(l[2][0] + l[1][0], l[2][1] + l[1][1]),
        ]
        .into_iter()
        .flatten()
        .filter(|&t| t > 0.0)
        .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let l00 = fabs(l[0][0]);
        let s = fabs(l[2][2]);
        self.integrator.angular.integrate(&breaks, |theta| {
            let (sin, cos) = libm::sincos(theta);
            let x1 = l00 * fabs(cos);
            let radial = match indicator {
                Indicator::Always => RADIAL_MASS,
                _ => {
                    let t = fabs(l[1][0] * cos + l[1][1] * sin);
                    let c = l[2][0] * cos + l[2][1] * sin;
                    let within = if s == 0.0 {
                        if fabs(c) <= t {
                            RADIAL_MASS
                        } else {
                            0.0
                        }
                    } else {
                        radial_window((-t - c) / s, (t - c) / s)
                    };
                    if indicator == Indicator::AWins {
                        RADIAL_MASS - within
                    } else {
                        within
                    }
                }
            };
            x1 * radial
        })
    }
}

/// Reusable evaluator holding one Hermite rule.
#[derive(Debug, Clone)]
pub struct Integrator {
    rule: HermiteRule,
    angular: AngularRule,
}

impl Integrator {
    pub fn new(order: usize) -> Result<Self> {
        Ok(Self {
            rule: hermite_rule(order)?,
            angular: AngularRule::new(order)?,
        })
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn rule(&self) -> &HermiteRule {
        &self.rule
    }

    pub fn grid(&self, sigma: &GameCovariance) -> Result<CubatureGrid<'_>> {
        Ok(CubatureGrid::new(self, psd_sqrt(sigma)?))
    }

    pub fn expect(&self, sigma: &GameCovariance, indicator: Indicator) -> Result<f64> {
        Ok(self.grid(sigma)?.expectation(indicator))
    }
}

/// Cubature approximation of `E[|x1| 1(|x2| < |x3|)]` under `N(0, Σ)`.
pub fn expect_reward_integrand(sigma: &GameCovariance, m: usize) -> Result<f64> {
    Integrator::new(m)?.expect(sigma, Indicator::AWins)
}

/// A cubature value together with the order it was taken at and the gap to
/// the comparison order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatedValue {
    pub value: f64,
    pub order: usize,
    pub gap: f64,
}

/// Evaluates at order `m` and compares against order `m - 12` (or `m + 12`
/// for small `m`). A gap of `1e-3` or more escalates to order 120.
pub fn expect_gated(sigma: &GameCovariance, m: usize, indicator: Indicator) -> Result<GatedValue> {
    let at = |order: usize| Integrator::new(order)?.expect(sigma, indicator);
    let partner = |order: usize| {
        if order > GATE_STEP {
            order - GATE_STEP
        } else {
            order + GATE_STEP
        }
    };
    let value = at(m)?;
    let gap = fabs(value - at(partner(m))?);
    if gap < GATE_TOL || m >= ESCALATED_ORDER {
        return Ok(GatedValue {
            value,
            order: m,
            gap,
        });
    }
    let value = at(ESCALATED_ORDER)?;
    let gap = fabs(value - at(partner(ESCALATED_ORDER))?);
    Ok(GatedValue {
        value,
        order: ESCALATED_ORDER,
        gap,
    })
}
