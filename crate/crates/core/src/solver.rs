//! Maxmin search over block strategies: A maximizes, B minimizes.
//!
//! The search is a deterministic nested coarse-to-fine grid. Each level
//! evaluates a `coarse_points × coarse_points` grid, then re-grids a window
//! shrunk by `refine_shrink` around the incumbent, `refine_rounds` times.
//! Ties between equal values go to the lexicographically smallest point, so
//! the result does not depend on evaluation order.
//!
//! An outer candidate is abandoned as soon as any of its inner evaluations
//! drops strictly below the best guaranteed value found so far: every
//! evaluated point bounds the inner minimum from above, so such a candidate
//! cannot win. The answer is the same as without pruning.

use alloc::vec::Vec;
use libm::{fabs, round};

use crate::cubature::{self, Indicator, Integrator};
use crate::discrete::{OutcomeTable, Rational, ValueDomain};
use crate::model::{symmetric_unchecked, FeatureRegime, SymmetricStrategyPair};
use crate::{Error, Result};
use num_traits::Zero;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn contains_edge(&self, x: f64) -> bool {
        x <= self.lo || x >= self.hi
    }

    /// `points` evenly spaced values from `lo` to `hi` inclusive.
    fn grid(&self, points: usize) -> impl Iterator<Item = f64> + '_ {
        let last = points - 1;
        (0..points).map(move |i| {
            if i == last {
                self.hi
            } else {
                self.lo + self.width() * i as f64 / last as f64
            }
        })
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Window of `shrink` times this width centered on `center`, moved back
    /// inside `bounds` if it sticks out.
    fn shrink_around(&self, center: f64, shrink: f64, bounds: &Interval) -> Interval {
        let width = (self.width() * shrink).min(bounds.width());
        let mut lo = center - 0.5 * width;
        let mut hi = center + 0.5 * width;
        if lo < bounds.lo {
            lo = bounds.lo;
            hi = lo + width;
        }
        if hi > bounds.hi {
            hi = bounds.hi;
            lo = hi - width;
        }
        Interval { lo, hi }
    }
}

pub const DEFAULT_BOX: Interval = Interval::new(-2.0, 5.0);
pub const DEFAULT_COARSE_POINTS: usize = 29;
pub const DEFAULT_REFINE_ROUNDS: usize = 3;
pub const DEFAULT_REFINE_SHRINK: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Range applied to every coefficient.
    pub bounds: Interval,
    pub coarse_points: usize,
    pub refine_rounds: usize,
    pub refine_shrink: f64,
    pub cubature_order: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            bounds: DEFAULT_BOX,
            coarse_points: DEFAULT_COARSE_POINTS,
            refine_rounds: DEFAULT_REFINE_ROUNDS,
            refine_shrink: DEFAULT_REFINE_SHRINK,
            cubature_order: cubature::DEFAULT_ORDER,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let b = self.bounds;
        if !(b.lo.is_finite() && b.hi.is_finite() && b.lo < b.hi) {
            return Err(Error::InvalidConfig(alloc::format!(
                "box [{}, {}] is empty or not finite",
                b.lo,
                b.hi
            )));
        }
        if self.coarse_points < 5 {
            return Err(Error::InvalidConfig(alloc::format!(
                "coarse_points must be at least 5, got {}",
                self.coarse_points
            )));
        }
        if !(self.refine_shrink > 0.0 && self.refine_shrink < 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "refine_shrink must lie in (0, 1), got {}",
                self.refine_shrink
            )));
        }
        // one extra round is spent re-solving the inner problem at the answer
        let finest = b.width() * libm::pow(self.refine_shrink, (self.refine_rounds + 1) as f64);
        if finest <= 1e-6 {
            return Err(Error::InvalidConfig(alloc::format!(
                "refinement shrinks the window to {finest:e}, below 1e-6"
            )));
        }
        if self.cubature_order == 0 || self.cubature_order > cubature::MAX_ORDER {
            return Err(Error::InvalidOrder(self.cubature_order));
        }
        Ok(())
    }

    fn spacing(&self, window: &Interval) -> f64 {
        window.width() / (self.coarse_points - 1) as f64
    }
}

type Point = [f64; 2];

fn lex_less(p: &Point, q: &Point) -> bool {
    p[0] < q[0] || (p[0] == q[0] && p[1] < q[1])
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: f64,
    point: Point,
}

impl Candidate {
    fn beats_min(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.value < o.value || (self.value == o.value && lex_less(&self.point, &o.point))
            }
        }
    }

    fn beats_max(&self, other: &Option<Candidate>) -> bool {
        match other {
            None => true,
            Some(o) => {
                self.value > o.value || (self.value == o.value && lex_less(&self.point, &o.point))
            }
        }
    }
}

/// `U_g(a1, a2)` at a fixed order, with an evaluation counter.
struct Evaluator {
    integrator: Integrator,
    regime: FeatureRegime,
    evals: u64,
}

impl Evaluator {
    fn new(regime: &FeatureRegime, order: usize) -> Result<Self> {
        Ok(Self {
            integrator: Integrator::new(order)?,
            regime: *regime,
            evals: 0,
        })
    }

    fn reward(&mut self, a1: Point, a2: Point) -> Result<f64> {
        self.evals += 1;
        let sigma = symmetric_unchecked(
            self.regime.g1(),
            self.regime.g2(),
            self.regime.g12(),
            &SymmetricStrategyPair::from_blocks(a1, a2),
        );
        self.integrator.expect(&sigma, Indicator::AWins)
    }
}

/// B's minimizing response to a fixed A strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    /// `(a21, a22)`
    pub a2: [f64; 2],
    pub u_min: f64,
    /// Best point of the coarse stage.
    pub coarse_a2: [f64; 2],
    /// Grid spacing of the last refinement round.
    pub spacing: f64,
    pub evals: u64,
    /// Minimizer sits on the edge of the box; the true infimum may be outside.
    pub on_boundary: bool,
}

enum Inner {
    Pruned,
    Found(BestResponse),
}

struct Search<'a> {
    cfg: &'a SearchConfig,
    eval: Evaluator,
}

impl Search<'_> {
    /// Coarse-to-fine minimization over B's coefficients. Returns `Pruned` as
    /// soon as any value falls strictly below `threshold`.
    fn inner(
        &mut self,
        a1: Point,
        rounds: usize,
        threshold: f64,
        probe: Option<Point>,
    ) -> Result<Inner> {
        let start = self.eval.evals;
        if let Some(p) = probe {
            if self.eval.reward(a1, p)? < threshold {
                return Ok(Inner::Pruned);
            }
        }
        let bounds = self.cfg.bounds;
        let mut window = [bounds, bounds];
        let mut best: Option<Candidate> = None;
        // B's theoretical strategy and a copy of A's are always tried.
        for seed in [[1.0, 1.0], a1] {
            let point = [bounds.clamp(seed[0]), bounds.clamp(seed[1])];
            let c = Candidate {
                value: self.eval.reward(a1, point)?,
                point,
            };
            if c.value < threshold {
                return Ok(Inner::Pruned);
            }
            if c.beats_min(&best) {
                best = Some(c);
            }
        }
        let mut coarse = [0.0; 2];
        for round in 0..=rounds {
            if let (true, Some(b)) = (round > 0, best) {
                window = [
                    window[0].shrink_around(b.point[0], self.cfg.refine_shrink, &bounds),
                    window[1].shrink_around(b.point[1], self.cfg.refine_shrink, &bounds),
                ];
            }
            for x in window[0].grid(self.cfg.coarse_points) {
                for y in window[1].grid(self.cfg.coarse_points) {
                    let c = Candidate {
                        value: self.eval.reward(a1, [x, y])?,
                        point: [x, y],
                    };
                    if c.value < threshold {
                        return Ok(Inner::Pruned);
                    }
                    if c.beats_min(&best) {
                        best = Some(c);
                    }
                }
            }
            if round == 0 {
                coarse = best.expect("grid has points").point;
            }
        }
        let best = best.expect("grid has points");
        Ok(Inner::Found(BestResponse {
            a2: best.point,
            u_min: best.value,
            coarse_a2: coarse,
            spacing: self
                .cfg
                .spacing(&window[0])
                .max(self.cfg.spacing(&window[1])),
            evals: self.eval.evals - start,
            on_boundary: bounds.contains_edge(best.point[0]) || bounds.contains_edge(best.point[1]),
        }))
    }

    fn full_inner(&mut self, a1: Point, rounds: usize) -> Result<BestResponse> {
        match self.inner(a1, rounds, f64::NEG_INFINITY, None)? {
            Inner::Found(r) => Ok(r),
            Inner::Pruned => unreachable!("no threshold"),
        }
    }
}

/// B's best response to A's `(a11, a12)` over the search box.
pub fn best_response_b(
    regime: &FeatureRegime,
    a1: [f64; 2],
    cfg: &SearchConfig,
) -> Result<BestResponse> {
    cfg.validate()?;
    SymmetricStrategyPair::from_blocks(a1, [1.0, 1.0]).validate()?;
    let mut search = Search {
        cfg,
        eval: Evaluator::new(regime, cfg.cubature_order)?,
    };
    search.full_inner(a1, cfg.refine_rounds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchDiagnostics {
    /// Reward evaluations across the whole search.
    pub evals: u64,
    /// Outer grid spacing in the last round.
    pub outer_spacing: f64,
    /// Inner grid spacing of the final best response.
    pub inner_spacing: f64,
    /// `|U(m) - U(m - 12)|` at the solution pair.
    pub cubature_gap: f64,
    /// A's maximizer or B's response lies on the box edge.
    pub on_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxminSolution {
    /// Guaranteed normalized reward `U*`.
    pub u_star: f64,
    /// `(a11, a12)`
    pub a1_star: [f64; 2],
    /// `(a21, a22)`
    pub a2_response: [f64; 2],
    /// `U` with both players theoretical.
    pub u_theoretical: f64,
    pub gain: f64,
    pub diagnostics: SearchDiagnostics,
}

/// `max_{a1} min_{a2} U_g(a1, a2)` over the search box.
pub fn maxmin(regime: &FeatureRegime, cfg: &SearchConfig) -> Result<MaxminSolution> {
    cfg.validate()?;
    let bounds = cfg.bounds;
    let mut search = Search {
        cfg,
        eval: Evaluator::new(regime, cfg.cubature_order)?,
    };

    let mut best: Option<(Candidate, BestResponse)> = None;
    let mut window = [bounds, bounds];
    for _ in 0..=cfg.refine_rounds {
        if let Some((c, _)) = &best {
            window = [
                window[0].shrink_around(c.point[0], cfg.refine_shrink, &bounds),
                window[1].shrink_around(c.point[1], cfg.refine_shrink, &bounds),
            ];
        }
        let mut points: Vec<Point> = Vec::with_capacity(cfg.coarse_points * cfg.coarse_points);
        for x in window[0].grid(cfg.coarse_points) {
            for y in window[1].grid(cfg.coarse_points) {
                points.push([x, y]);
            }
        }
        // The theoretical strategy goes first: it is always a candidate and
        // gives pruning a bound early.
        if best.is_none() {
            points.insert(0, [bounds.clamp(1.0), bounds.clamp(1.0)]);
        }
        for a1 in points {
            let (threshold, probe) = match &best {
                Some((c, r)) => (c.value, Some(r.coarse_a2)),
                None => (f64::NEG_INFINITY, None),
            };
            if let Inner::Found(r) = search.inner(a1, cfg.refine_rounds, threshold, probe)? {
                let c = Candidate {
                    value: r.u_min,
                    point: a1,
                };
                if c.beats_max(&best.map(|b| b.0)) {
                    best = Some((c, r));
                }
            }
        }
    }
    let (incumbent, _) = best.expect("grid has points");
    let a1_star = incumbent.point;
    let response = search.full_inner(a1_star, cfg.refine_rounds + 1)?;
    let u_theoretical = search.eval.reward([1.0, 1.0], [1.0, 1.0])?;

    let partner = if cfg.cubature_order > cubature::GATE_STEP {
        cfg.cubature_order - cubature::GATE_STEP
    } else {
        cfg.cubature_order + cubature::GATE_STEP
    };
    let sigma = crate::model::build_covariance_symmetric(
        regime,
        &SymmetricStrategyPair::from_blocks(a1_star, response.a2),
    )?;
    let cubature_gap =
        fabs(response.u_min - Integrator::new(partner)?.expect(&sigma, Indicator::AWins)?);

    Ok(MaxminSolution {
        u_star: response.u_min,
        a1_star,
        a2_response: response.a2,
        u_theoretical,
        gain: gain(response.u_min, u_theoretical),
        diagnostics: SearchDiagnostics {
            evals: search.eval.evals,
            outer_spacing: cfg.spacing(&window[0]).max(cfg.spacing(&window[1])),
            inner_spacing: response.spacing,
            cubature_gap,
            on_boundary: response.on_boundary
                || bounds.contains_edge(a1_star[0])
                || bounds.contains_edge(a1_star[1]),
        },
    })
}

/// `u_star / u_theoretical`; a zero baseline gives 1 when nothing is
/// guaranteed either, and infinity otherwise.
fn gain(u_star: f64, u_theoretical: f64) -> f64 {
    if u_theoretical > 0.0 {
        u_star / u_theoretical
    } else if u_star > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// How `g12` is chosen for each sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverlapRule {
    /// `g12 = g1 g2`: independently drawn feature sets.
    Product,
    Fixed(f64),
}

impl OverlapRule {
    pub fn overlap(&self, g1: f64, g2: f64) -> f64 {
        match *self {
            OverlapRule::Product => g1 * g2,
            OverlapRule::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub g1: f64,
    pub g2: f64,
    pub g12: f64,
    /// `None` when `(g1, g2, g12)` is not a valid regime.
    pub solution: Option<MaxminSolution>,
}

pub fn sweep_cell(g1: f64, g2: f64, rule: OverlapRule, cfg: &SearchConfig) -> Result<SweepRow> {
    let g12 = rule.overlap(g1, g2);
    let solution = match FeatureRegime::new(g1, g2, g12) {
        Ok(regime) => Some(maxmin(&regime, cfg)?),
        Err(Error::InvalidRegime(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SweepRow {
        g1,
        g2,
        g12,
        solution,
    })
}

/// One row per `(g1, g2)` cell, `g1`-major.
pub fn regime_sweep(
    g1s: &[f64],
    g2s: &[f64],
    rule: OverlapRule,
    cfg: &SearchConfig,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(g1s.len() * g2s.len());
    for &g1 in g1s {
        for &g2 in g2s {
            rows.push(sweep_cell(g1, g2, rule, cfg)?);
        }
    }
    Ok(rows)
}

/// Fraction of solved cells whose maximizer has every coefficient above 1.
pub fn magnification_fraction(rows: &[SweepRow]) -> f64 {
    let solved: Vec<&MaxminSolution> = rows.iter().filter_map(|r| r.solution.as_ref()).collect();
    if solved.is_empty() {
        return 0.0;
    }
    let magnified = solved
        .iter()
        .filter(|s| s.a1_star.iter().all(|&a| a > 1.0))
        .count();
    magnified as f64 / solved.len() as f64
}

/// `lo, lo + step, ..., hi` with the count taken from the rounded ratio;
/// the `i`-th value is `lo + i * step`.
pub fn step_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step.is_finite() && step > 0.0 && hi >= lo) {
        return Err(Error::InvalidConfig(alloc::format!(
            "grid {lo}:{hi}:{step} is not a nonempty increasing range"
        )));
    }
    let count = round((hi - lo) / step) as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

/// `lo, lo + step, ...` up to and including the last point not above `hi`.
pub fn rational_grid(lo: Rational, hi: Rational, step: Rational) -> Result<Vec<Rational>> {
    if step <= Rational::zero() || hi < lo {
        return Err(Error::InvalidConfig(alloc::format!(
            "grid {lo}:{hi}:{step} is not a nonempty increasing range"
        )));
    }
    let count = ((hi - lo) / step).floor().to_integer() + 1;
    if count > 100_000 {
        return Err(Error::InvalidConfig(alloc::format!(
            "grid has {count} points; the limit is 100000"
        )));
    }
    Ok((0..count)
        .map(|i| lo + step * Rational::from_integer(i))
        .collect())
}

/// Maxmin of the four-bit example when each player uses one common
/// coefficient (`α` for both of A's features, `β` for all of B's).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMaxmin {
    pub value: Rational,
    /// Smallest maximizing `α` on the grid.
    pub alpha: Rational,
    /// Largest maximizing `α` on the grid.
    pub alpha_last: Rational,
    /// Number of grid values of `α` attaining the maxmin.
    pub maximizers: usize,
    /// B's smallest minimizing `β` against `alpha`.
    pub beta_response: Rational,
    /// `R1` at `α = β = 1`.
    pub baseline: Rational,
    pub gain: f64,
    pub evals: u64,
}

/// Exhaustive grid maxmin on `[lo, hi]²` with the given step, in exact
/// arithmetic.
pub fn discrete_maxmin_equal(lo: Rational, hi: Rational, step: Rational) -> Result<DiscreteMaxmin> {
    let grid = rational_grid(lo, hi, step)?;
    let table = OutcomeTable::new(4, &ValueDomain::fair_bits())?;
    let zero = Rational::zero();
    let coef = |alpha: Rational, beta: Rational| {
        [(alpha, zero), (alpha, beta), (zero, beta), (zero, beta)]
    };
    let mut evals = 0u64;
    let mut best: Option<(Rational, Rational, Rational)> = None;
    let (mut alpha_last, mut maximizers) = (zero, 0);
    for &alpha in &grid {
        let mut inner: Option<(Rational, Rational)> = None;
        let mut pruned = false;
        for &beta in &grid {
            evals += 1;
            let (r1, _) = table.rewards(&coef(alpha, beta))?;
            if let Some((b, _, _)) = best {
                if r1 < b {
                    pruned = true;
                    break;
                }
            }
            if inner.is_none_or(|(v, _)| r1 < v) {
                inner = Some((r1, beta));
            }
        }
        if pruned {
            continue;
        }
        let (v, beta) = inner.expect("grid has points");
        match best {
            Some((b, _, _)) if v == b => {
                maximizers += 1;
                alpha_last = alpha;
            }
            Some((b, _, _)) if v < b => {}
            _ => {
                best = Some((v, alpha, beta));
                maximizers = 1;
                alpha_last = alpha;
            }
        }
    }
    let (value, alpha, beta_response) = best.expect("grid has points");
    let one = Rational::from_integer(1);
    let baseline = table.rewards(&coef(one, one))?.0;
    Ok(DiscreteMaxmin {
        value,
        alpha,
        alpha_last,
        maximizers,
        beta_response,
        baseline,
        gain: crate::discrete::to_f64(value) / crate::discrete::to_f64(baseline),
        evals,
    })
}
