//! One-dimensional elections acting on weighted opinion distributions.
//!
//! Three election rules are provided: the weighted mean, the weighted lower
//! median, and the expected-utility argmax with a Gaussian alienation kernel
//! `u(y - x) = exp(-(y - x)² / 2a²)`. The last one is continuous for weakly
//! polarized electorates and becomes discontinuous once the symmetric
//! two-Gaussian electorate crosses `J = 1`.
//!
//! The utility argmax scans a grid over `[min position - 4a, max position + 4a]`,
//! refines every competitive local maximum by successive ×16 sub-grids and
//! finishes with guarded Newton steps on the analytic derivatives. Exact ties
//! resolve to the smallest position.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Discrete electorate: positions with normalized weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedOpinions<T> {
    positions: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> WeightedOpinions<T> {
    /// Normalizes `weights` to sum to one.
    pub fn new(positions: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty("electorate has no voters"));
        }
        if positions.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positions but {} weights",
                positions.len(),
                weights.len()
            )));
        }
        if let Some(x) = positions.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("voter position {x}")));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        Ok(WeightedOpinions {
            positions,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(positions: Vec<T>) -> Result<Self> {
        let w = vec![T::one(); positions.len()];
        Self::new(positions, w)
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn mean(&self) -> T {
        self.positions
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * x)
            .sum()
    }

    pub fn variance(&self) -> T {
        let m = self.mean();
        self.positions
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * (x - m) * (x - m))
            .sum()
    }

    /// Same electorate with voter `i` moved to `x`.
    pub fn with_position(&self, i: usize, x: T) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::OutOfRange {
                index: i,
                len: self.len(),
            });
        }
        let mut out = self.clone();
        out.positions[i] = x;
        Ok(out)
    }

    /// Same weights with every position mapped through `f`.
    pub fn map_positions(&self, f: impl Fn(T) -> T) -> Result<Self> {
        let positions: Vec<T> = self.positions.iter().map(|&x| f(x)).collect();
        if let Some(x) = positions.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("voter position {x}")));
        }
        Ok(WeightedOpinions {
            positions,
            weights: self.weights.clone(),
        })
    }

    /// Every position shifted by `c`.
    pub fn shifted(&self, c: T) -> Self {
        WeightedOpinions {
            positions: self.positions.iter().map(|&x| x + c).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Every position multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        WeightedOpinions {
            positions: self.positions.iter().map(|&x| x * s).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// Two equal-width Gaussian subpopulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mixture2<T> {
    pub pi_a: T,
    pub pi_b: T,
    pub mu_a: T,
    pub mu_b: T,
    pub sigma: T,
}

impl<T: Scalar> Mixture2<T> {
    /// Normalizes the subpopulation weights to sum to one.
    pub fn new(pi_a: T, pi_b: T, mu_a: T, mu_b: T, sigma: T) -> Result<Self> {
        if !(pi_a >= T::zero() && pi_b >= T::zero()) || pi_a + pi_b <= T::zero() {
            return Err(Error::InvalidParameter(
                "mixture weights must be nonnegative and not both zero".into(),
            ));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidParameter("mixture sigma must be positive".into()));
        }
        if !mu_a.is_finite() || !mu_b.is_finite() {
            return Err(Error::NonFinite("mixture means".into()));
        }
        let s = pi_a + pi_b;
        Ok(Mixture2 {
            pi_a: pi_a / s,
            pi_b: pi_b / s,
            mu_a,
            mu_b,
            sigma,
        })
    }

    /// Equal weights, means `±delta`.
    pub fn symmetric(delta: T, sigma: T) -> Result<Self> {
        let half = T::lit(0.5);
        Self::new(half, half, delta, -delta, sigma)
    }

    pub fn mean(&self) -> T {
        self.pi_a * self.mu_a + self.pi_b * self.mu_b
    }

    /// `σ² + π_A π_B (μ_A − μ_B)²`.
    pub fn variance(&self) -> T {
        let d = self.mu_a - self.mu_b;
        self.sigma * self.sigma + self.pi_a * self.pi_b * d * d
    }

    pub fn cdf(&self, x: T) -> T {
        let z = |mu: T| (x - mu) / (self.sigma * T::lit(std::f64::consts::SQRT_2));
        let phi = |mu: T| T::lit(0.5) * (T::one() + erf(z(mu)));
        self.pi_a * phi(self.mu_a) + self.pi_b * phi(self.mu_b)
    }
}

/// Error function, accurate to roughly 1e-15 in `f64`.
pub(crate) fn erf<T: Scalar>(x: T) -> T {
    let ax = x.abs();
    let two_over_sqrt_pi = T::lit(std::f64::consts::FRAC_2_SQRT_PI);
    let r = if ax < T::lit(2.5) {
        // Maclaurin series
        let x2 = ax * ax;
        let mut term = ax;
        let mut sum = ax;
        let mut n = 0usize;
        loop {
            n += 1;
            term = -term * x2 / T::count(n);
            let add = term / T::count(2 * n + 1);
            sum += add;
            if add.abs() <= T::epsilon() * sum.abs() * T::lit(0.1) || n > 200 {
                break;
            }
        }
        two_over_sqrt_pi * sum
    } else {
        // continued fraction for erfc, modified Lentz
        let tiny = T::lit(1e-300).max(T::min_positive_value());
        let mut f = ax;
        let mut c = ax;
        let mut d = T::zero();
        for k in 1..300usize {
            let ak = T::lit(k as f64 * 0.5);
            d = ax + ak * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = ax + ak / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = T::one() / d;
            let delta = c * d;
            f *= delta;
            if (delta - T::one()).abs() < T::epsilon() {
                break;
            }
        }
        let erfc = (-ax * ax).exp() / (f * T::lit(std::f64::consts::PI.sqrt()));
        T::one() - erfc
    };
    if x < T::zero() {
        -r
    } else {
        r
    }
}

/// Anything an election can act on: a sample or a closed-form mixture.
pub trait Electorate<T: Scalar> {
    fn mean(&self) -> T;
    /// Weighted lower median.
    fn median(&self) -> T;
    /// Positions bounding the support relevant to the utility argmax.
    fn span(&self) -> (T, T);
    /// Expected Gaussian-kernel utility of outcome `y` and its first two
    /// derivatives in `y`.
    fn utility(&self, y: T, a: T) -> (T, T, T);
}

impl<T: Scalar> Electorate<T> for WeightedOpinions<T> {
    fn mean(&self) -> T {
        WeightedOpinions::mean(self)
    }

    fn median(&self) -> T {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.positions[a].partial_cmp(&self.positions[b]).unwrap());
        let half = T::lit(0.5) - T::lit(1e-12);
        let mut cum = T::zero();
        for &i in &idx {
            cum += self.weights[i];
            if cum >= half {
                return self.positions[i];
            }
        }
        self.positions[idx[idx.len() - 1]]
    }

    fn span(&self) -> (T, T) {
        let lo = self.positions.iter().copied().fold(T::infinity(), T::min);
        let hi = self.positions.iter().copied().fold(T::neg_infinity(), T::max);
        (lo, hi)
    }

    fn utility(&self, y: T, a: T) -> (T, T, T) {
        let inv = T::one() / (a * a);
        let mut u = (T::zero(), T::zero(), T::zero());
        for (&x, &w) in self.positions.iter().zip(&self.weights) {
            let d = y - x;
            let k = w * (-T::lit(0.5) * d * d * inv).exp();
            u.0 += k;
            u.1 -= k * d * inv;
            u.2 += k * (d * d * inv - T::one()) * inv;
        }
        u
    }
}

impl<T: Scalar> Electorate<T> for Mixture2<T> {
    fn mean(&self) -> T {
        Mixture2::mean(self)
    }

    fn median(&self) -> T {
        let half = T::lit(0.5);
        let width = T::lit(10.0) * self.sigma;
        let (mut lo, mut hi) = (self.mu_a.min(self.mu_b) - width, self.mu_a.max(self.mu_b) + width);
        for _ in 0..200 {
            let mid = T::lit(0.5) * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < half {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    fn span(&self) -> (T, T) {
        (self.mu_a.min(self.mu_b), self.mu_a.max(self.mu_b))
    }

    fn utility(&self, y: T, a: T) -> (T, T, T) {
        // Gaussian kernel convolved with a Gaussian component
        let s2 = a * a + self.sigma * self.sigma;
        let amp = a / s2.sqrt();
        let mut u = (T::zero(), T::zero(), T::zero());
        for (pi, mu) in [(self.pi_a, self.mu_a), (self.pi_b, self.mu_b)] {
            let d = y - mu;
            let k = pi * amp * (-T::lit(0.5) * d * d / s2).exp();
            u.0 += k;
            u.1 -= k * d / s2;
            u.2 += k * (d * d / s2 - T::one()) / s2;
        }
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElectionKind {
    Mean,
    Median,
    UtilityArgmax,
}

/// Election rule with its numerical settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElectionModel<T> {
    pub kind: ElectionKind,
    /// Alienation scale `a` (utility argmax only).
    pub alienation: T,
    /// Coarse grid size for the utility argmax (at least 4096).
    pub grid_points: usize,
    /// Sub-grid refinement factor around each candidate maximum.
    pub refine: usize,
}

pub const MIN_GRID_POINTS: usize = 4096;

impl<T: Scalar> ElectionModel<T> {
    pub fn mean() -> Self {
        ElectionModel {
            kind: ElectionKind::Mean,
            alienation: T::one(),
            grid_points: MIN_GRID_POINTS + 1,
            refine: 16,
        }
    }

    pub fn median() -> Self {
        ElectionModel {
            kind: ElectionKind::Median,
            ..Self::mean()
        }
    }

    pub fn utility(alienation: T) -> Self {
        ElectionModel {
            kind: ElectionKind::UtilityArgmax,
            alienation,
            ..Self::mean()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ElectionKind::UtilityArgmax {
            if !(self.alienation > T::zero()) || !self.alienation.is_finite() {
                return Err(Error::InvalidParameter(
                    "alienation scale must be positive".into(),
                ));
            }
            if self.grid_points < MIN_GRID_POINTS || self.refine < 2 {
                return Err(Error::InvalidParameter(format!(
                    "argmax grid needs at least {MIN_GRID_POINTS} points and refinement ≥ 2"
                )));
            }
        }
        Ok(())
    }

    /// Election outcome. Ties in the utility argmax resolve to the smallest position.
    pub fn elect<E: Electorate<T>>(&self, electorate: &E) -> Result<T> {
        self.validate()?;
        Ok(match self.kind {
            ElectionKind::Mean => electorate.mean(),
            ElectionKind::Median => electorate.median(),
            ElectionKind::UtilityArgmax => utility_maximizers(self, electorate)?[0],
        })
    }

    /// All global maximizers of the expected utility in ascending order
    /// (two or more only at an exact tie, e.g. a symmetric bimodal electorate
    /// past the instability threshold). Non-utility kinds return the outcome.
    pub fn branches<E: Electorate<T>>(&self, electorate: &E) -> Result<Vec<T>> {
        self.validate()?;
        match self.kind {
            ElectionKind::UtilityArgmax => utility_maximizers(self, electorate),
            _ => Ok(vec![self.elect(electorate)?]),
        }
    }
}

fn utility_maximizers<T: Scalar, E: Electorate<T>>(model: &ElectionModel<T>, e: &E) -> Result<Vec<T>> {
    let a = model.alienation;
    let (lo, hi) = e.span();
    let (lo, hi) = (lo - T::lit(4.0) * a, hi + T::lit(4.0) * a);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::NonFinite("electorate span".into()));
    }
    let n = model.grid_points;
    let step = (hi - lo) / T::count(n - 1);
    let grid: Vec<T> = (0..n).map(|i| lo + step * T::count(i)).collect();
    let vals: Vec<T> = grid.iter().map(|&y| e.utility(y, a).0).collect();
    let best = vals.iter().copied().fold(T::neg_infinity(), T::max);

    // competitive local maxima on the coarse grid
    let competitive = best * (T::one() - T::lit(1e-3));
    let mut candidates = Vec::new();
    for i in 0..n {
        let left = if i == 0 { T::neg_infinity() } else { vals[i - 1] };
        let right = if i + 1 == n {
            T::neg_infinity()
        } else {
            vals[i + 1]
        };
        if vals[i] >= left && vals[i] > right && vals[i] >= competitive {
            candidates.push(i);
        }
    }

    let mut refined: Vec<(T, T)> = candidates
        .into_iter()
        .map(|i| refine_max(e, a, grid[i], step, model.refine, lo, hi))
        .collect();
    let top = refined.iter().map(|r| r.1).fold(T::neg_infinity(), T::max);
    let tie = top.abs() * T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    refined.retain(|r| r.1 >= top - tie);
    refined.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    refined.dedup_by(|x, y| (x.0 - y.0).abs() <= step);
    Ok(refined.into_iter().map(|r| r.0).collect())
}

/// Sub-grid refinement around `y0` followed by guarded Newton polishing.
fn refine_max<T: Scalar, E: Electorate<T>>(
    e: &E,
    a: T,
    y0: T,
    step0: T,
    factor: usize,
    lo: T,
    hi: T,
) -> (T, T) {
    let mut y = y0;
    let mut step = step0;
    let mut best = e.utility(y, a).0;
    let floor = (hi - lo) * T::epsilon() * T::lit(8.0);
    while step > floor {
        let sub = step / T::count(factor);
        let (from, to) = ((y - step).max(lo), (y + step).min(hi));
        let m = ((to - from) / sub).round().to_usize().unwrap_or(0);
        let mut cand = (y, best);
        for k in 0..=m {
            let t = from + sub * T::count(k);
            let u = e.utility(t, a).0;
            if u > cand.1 || (u == cand.1 && t < cand.0) {
                cand = (t, u);
            }
        }
        y = cand.0;
        best = cand.1;
        step = sub;
        if step < (hi - lo) * T::lit(1e-9) {
            break;
        }
    }
    // grid values stop resolving the peak near sqrt(eps) of the range
    let reach = (step * T::lit(4.0)).max((hi - lo) * T::epsilon().sqrt() * T::lit(16.0));
    for _ in 0..50 {
        let (_, d1, d2) = e.utility(y, a);
        if !(d2 < T::zero()) {
            break;
        }
        let dy = -d1 / d2;
        if dy.abs() > reach {
            break;
        }
        // values are flat to rounding here, so steps are judged by the derivative
        y += dy;
        if dy.abs() <= T::epsilon() * (T::one() + y.abs()) * T::lit(4.0) {
            break;
        }
    }
    best = best.max(e.utility(y, a).0);
    (y, best)
}

/// Dimensionless polarization `J = (μ_A − μ_B)² / (4 (σ² + a²))`.
pub fn polarization_j<T: Scalar>(mix: &Mixture2<T>, a: T) -> T {
    let d = mix.mu_a - mix.mu_b;
    d * d / (T::lit(4.0) * (mix.sigma * mix.sigma + a * a))
}

/// Default finite-difference step: `1e-4` times the opinion standard deviation.
pub fn default_step<T: Scalar>(opinions: &WeightedOpinions<T>) -> T {
    let sd = opinions.variance().sqrt();
    T::lit(1e-4) * if sd > T::zero() { sd } else { T::one() }
}

/// Representation of voter `i`: the central difference
/// `[y(x_i + h) − y(x_i − h)] / 2h` with everyone else fixed.
pub fn representation<T: Scalar>(
    model: &ElectionModel<T>,
    opinions: &WeightedOpinions<T>,
    i: usize,
    h: T,
) -> Result<T> {
    if !(h > T::zero()) {
        return Err(Error::InvalidParameter(
            "finite-difference step must be positive".into(),
        ));
    }
    let x = *opinions.positions().get(i).ok_or(Error::OutOfRange {
        index: i,
        len: opinions.len(),
    })?;
    let up = model.elect(&opinions.with_position(i, x + h)?)?;
    let down = model.elect(&opinions.with_position(i, x - h)?)?;
    Ok((up - down) / (h + h))
}

/// Outcome change per unit opinion change for a finite shift of voter `i`.
/// Negative values mark anti-responsive (negatively represented) shifts.
pub fn finite_shift_representation<T: Scalar>(
    model: &ElectionModel<T>,
    opinions: &WeightedOpinions<T>,
    i: usize,
    shift: T,
) -> Result<T> {
    if shift == T::zero() {
        return Err(Error::InvalidParameter("shift must be nonzero".into()));
    }
    let x = *opinions.positions().get(i).ok_or(Error::OutOfRange {
        index: i,
        len: opinions.len(),
    })?;
    let base = model.elect(opinions)?;
    let moved = model.elect(&opinions.with_position(i, x + shift)?)?;
    Ok((moved - base) / shift)
}

/// Settings for [`detect_instability`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InstabilityConfig<T> {
    /// Intervals in the initial uniform scan of the parameter range.
    pub initial_intervals: usize,
    /// Smallest parameter step, relative to the range, before stopping.
    pub step_floor: T,
    /// Jumps below this absolute size count as continuity.
    pub jump_tolerance: T,
}

impl<T: Scalar> Default for InstabilityConfig<T> {
    fn default() -> Self {
        InstabilityConfig {
            initial_intervals: 64,
            step_floor: T::lit(1e-12),
            jump_tolerance: T::lit(1e-6),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstabilityReport<T> {
    /// Largest outcome change across one step at the finest resolution.
    pub jump: T,
    /// Parameter value at the centre of the interval holding the jump.
    pub location: T,
    /// `(step, largest jump)` per halving, coarsest first.
    pub history: Vec<(T, T)>,
    pub unstable: bool,
}

/// Estimates the largest outcome discontinuity of `model` over a family of
/// electorates `family(ε)`, `ε ∈ [lo, hi]`.
///
/// After a uniform scan, the interval with the largest outcome change is
/// bisected repeatedly, keeping the half with the larger change. For a
/// continuous election the jump shrinks with the step; at a discontinuity it
/// stays bounded away from zero.
pub fn detect_instability<T, E, F>(
    model: &ElectionModel<T>,
    family: F,
    lo: T,
    hi: T,
    config: &InstabilityConfig<T>,
) -> Result<InstabilityReport<T>>
where
    T: Scalar,
    E: Electorate<T>,
    F: Fn(T) -> Result<E>,
{
    if !(hi > lo) || config.initial_intervals == 0 {
        return Err(Error::InvalidParameter("empty parameter range".into()));
    }
    let outcome = |eps: T| -> Result<T> { model.elect(&family(eps)?) };
    let n = config.initial_intervals;
    let step = (hi - lo) / T::count(n);
    let ys = (0..=n)
        .map(|k| outcome(lo + step * T::count(k)))
        .collect::<Result<Vec<T>>>()?;
    let (k, jump0) =
        ys.windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .enumerate()
            .fold(
                (0, T::neg_infinity()),
                |acc, (i, j)| if j > acc.1 { (i, j) } else { acc },
            );

    let (mut a, mut b) = (lo + step * T::count(k), lo + step * T::count(k + 1));
    let (mut ya, mut yb) = (ys[k], ys[k + 1]);
    let mut history = vec![(step, jump0)];
    let floor = config.step_floor * (hi - lo);
    while (b - a) > floor && (yb - ya).abs() > config.jump_tolerance {
        let m = T::lit(0.5) * (a + b);
        if m <= a || m >= b {
            break;
        }
        let ym = outcome(m)?;
        if (ym - ya).abs() >= (yb - ym).abs() {
            b = m;
            yb = ym;
        } else {
            a = m;
            ya = ym;
        }
        history.push((b - a, (yb - ya).abs()));
    }
    let jump = (yb - ya).abs();
    let unstable = jump > config.jump_tolerance;
    if unstable && history.len() >= 3 {
        // still shrinking geometrically at the floor: resolution insufficient
        let prev = history[history.len() - 3].1;
        if jump < T::lit(0.3) * prev {
            return Err(Error::NoConvergence(format!(
                "jump still shrinking at step floor {}",
                b - a
            )));
        }
    }
    Ok(InstabilityReport {
        jump,
        location: T::lit(0.5) * (a + b),
        history,
        unstable,
    })
}

/// One row of a symmetric-electorate bifurcation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BifurcationRow<T> {
    pub j: T,
    /// Half-distance between the subpopulation means.
    pub delta: T,
    /// Global utility maximizers, ascending.
    pub branches: Vec<T>,
    /// Largest |maximizer|: zero below the threshold, positive above it.
    pub split: T,
}

/// Utility-argmax outcomes of the symmetric mixture `μ_A = −μ_B = Δ` for each
/// requested `J`, with `Δ = sqrt(J (σ² + a²))`.
pub fn bifurcation_sweep<T: Scalar>(
    model: &ElectionModel<T>,
    sigma: T,
    js: &[T],
) -> Result<Vec<BifurcationRow<T>>> {
    let a = model.alienation;
    js.iter()
        .map(|&j| {
            if j < T::zero() {
                return Err(Error::InvalidParameter(format!("J = {j} is negative")));
            }
            let delta = (j * (sigma * sigma + a * a)).sqrt();
            let mix = Mixture2::symmetric(delta, sigma)?;
            let branches = model.branches(&mix)?;
            let split = branches.iter().map(|b| b.abs()).fold(T::zero(), T::max);
            Ok(BifurcationRow {
                j,
                delta,
                branches,
                split,
            })
        })
        .collect()
}

/// First swept `J` whose outcome split exceeds `tol · Δ`.
pub fn bifurcation_onset<T: Scalar>(rows: &[BifurcationRow<T>], tol: T) -> Option<T> {
    rows.iter().find(|r| r.split > tol * r.delta).map(|r| r.j)
}
