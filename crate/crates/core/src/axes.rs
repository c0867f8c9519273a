//! Election axes in a d-dimensional opinion space.
//!
//! An election axis is the unit direction separating the two camps of an
//! electorate. It can be extracted from an opinion cloud (weighted 2-means or
//! the top principal component) or spanned by a candidate pair. Elections pull
//! on each other's axes: pairwise coupling, multilevel interaction systems and
//! partisan-tie transforms of candidate positions all contract the angles
//! between axes, which [`circular_dispersion`] measures.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{angle_between, canonical_sign, dot, norm, normalize, Scalar};

/// Weighted point cloud in `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionCloud<T> {
    points: Vec<Vec<T>>,
    weights: Vec<T>,
}

impl<T: Scalar> OpinionCloud<T> {
    /// Weights are normalized to sum to one.
    pub fn new(points: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("opinion cloud"));
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidParameter(
                "opinion dimension must be at least 1".into(),
            ));
        }
        if let Some(i) = points.iter().position(|p| p.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "point {i} has dimension {} instead of {d}",
                points[i].len()
            )));
        }
        if points.iter().flatten().chain(&weights).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("opinion cloud".into()));
        }
        if weights.iter().any(|&w| w < T::zero()) {
            return Err(Error::InvalidParameter("negative point weight".into()));
        }
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::Degenerate("point weights sum to zero".into()));
        }
        Ok(OpinionCloud {
            points,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn uniform(points: Vec<Vec<T>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![T::one(); n])
    }

    pub fn points(&self) -> &[Vec<T>] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim()];
        for (p, &w) in self.points.iter().zip(&self.weights) {
            m.iter_mut().zip(p).for_each(|(a, &x)| *a += w * x);
        }
        m
    }

    /// Weighted population covariance.
    pub fn covariance(&self) -> Matrix<T> {
        let mean = self.mean();
        let mut c = Matrix::zeros(self.dim());
        for (p, &w) in self.points.iter().zip(&self.weights) {
            let dev: Vec<T> = p.iter().zip(&mean).map(|(&x, &m)| x - m).collect();
            c.add_outer(w, &dev, &dev);
        }
        c
    }

    /// Weighted variance of the projections onto `direction`.
    pub fn projected_variance(&self, direction: &[T]) -> T {
        self.covariance().bilinear(direction, direction)
    }

    /// Replaces point `i`.
    pub fn with_point(&self, i: usize, x: Vec<T>) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::OutOfRange {
                index: i,
                len: self.len(),
            });
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch("replacement point dimension".into()));
        }
        let mut out = self.clone();
        out.points[i] = x;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisProvenance {
    TwoMeans,
    Pca,
    CandidatePair,
    Coupled,
}

/// Unit direction of an election.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionAxis<T> {
    pub direction: Vec<T>,
    pub provenance: AxisProvenance,
}

impl<T: Scalar> ElectionAxis<T> {
    /// Normalizes `direction`; a zero vector is degenerate.
    pub fn new(direction: &[T], provenance: AxisProvenance) -> Result<Self> {
        let direction =
            normalize(direction).ok_or_else(|| Error::Degenerate("zero-length election axis".into()))?;
        Ok(ElectionAxis {
            direction,
            provenance,
        })
    }

    /// Angle to another axis in `[0, π]`.
    pub fn angle_to(&self, other: &Self) -> T {
        angle_between(&self.direction, &other.direction)
    }
}

/// Restart and iteration budget for [`two_means_axis`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for TwoMeansConfig {
    fn default() -> Self {
        TwoMeansConfig {
            restarts: 16,
            max_iter: 500,
            seed: 0,
        }
    }
}

/// Result of weighted 2-means: the axis points from cluster 1 to cluster 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoMeansFit<T> {
    pub axis: ElectionAxis<T>,
    pub labels: Vec<usize>,
    pub centroids: [Vec<T>; 2],
    /// Weighted sum of squared distances to the assigned centroid.
    pub objective: T,
}

fn dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Weighted centroids of a two-way labelling, or `None` if a side has no mass.
fn centroids<T: Scalar>(cloud: &OpinionCloud<T>, labels: &[usize]) -> Option<[Vec<T>; 2]> {
    let d = cloud.dim();
    let mut sum = [vec![T::zero(); d], vec![T::zero(); d]];
    let mut mass = [T::zero(); 2];
    for ((p, &w), &l) in cloud.points.iter().zip(&cloud.weights).zip(labels) {
        mass[l] += w;
        sum[l].iter_mut().zip(p).for_each(|(s, &x)| *s += w * x);
    }
    if mass.iter().any(|&m| m <= T::zero()) {
        return None;
    }
    for k in 0..2 {
        sum[k].iter_mut().for_each(|s| *s /= mass[k]);
    }
    Some(sum)
}

/// Objective of a two-way labelling: `Σ w_i |x_i − μ_{c(i)}|²`.
pub fn two_means_objective<T: Scalar>(cloud: &OpinionCloud<T>, labels: &[usize]) -> Option<T> {
    let c = centroids(cloud, labels)?;
    Some(
        cloud
            .points
            .iter()
            .zip(&cloud.weights)
            .zip(labels)
            .map(|((p, &w), &l)| w * dist2(p, &c[l]))
            .sum(),
    )
}

fn lloyd<T: Scalar>(
    cloud: &OpinionCloud<T>,
    mut c: [Vec<T>; 2],
    max_iter: usize,
) -> Option<(Vec<usize>, [Vec<T>; 2])> {
    let mut labels = vec![usize::MAX; cloud.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (p, l) in cloud.points.iter().zip(labels.iter_mut()) {
            let k = usize::from(dist2(p, &c[1]) < dist2(p, &c[0]));
            if *l != k {
                *l = k;
                changed = true;
            }
        }
        c = centroids(cloud, &labels)?;
        if !changed {
            break;
        }
    }
    Some((labels, c))
}

/// Hartigan single-point moves: transfers a point whenever that lowers the
/// objective, accounting for both centroid shifts. Stable states are also
/// Lloyd-stable, and many Lloyd fixed points are not Hartigan-stable.
fn hartigan<T: Scalar>(
    cloud: &OpinionCloud<T>,
    labels: &mut [usize],
    max_passes: usize,
) -> Option<[Vec<T>; 2]> {
    let mut c = centroids(cloud, labels)?;
    let mut mass = [T::zero(); 2];
    for (&w, &l) in cloud.weights.iter().zip(labels.iter()) {
        mass[l] += w;
    }
    let margin = T::one() - T::epsilon() * T::lit(64.0);
    for _ in 0..max_passes {
        let mut moved = false;
        for (i, p) in cloud.points.iter().enumerate() {
            let w = cloud.weights[i];
            let (from, to) = (labels[i], 1 - labels[i]);
            if w <= T::zero() || mass[from] - w <= T::zero() {
                continue;
            }
            let stay = w * mass[from] / (mass[from] - w) * dist2(p, &c[from]);
            let go = w * mass[to] / (mass[to] + w) * dist2(p, &c[to]);
            if go < stay * margin {
                for k in 0..p.len() {
                    c[from][k] = (mass[from] * c[from][k] - w * p[k]) / (mass[from] - w);
                    c[to][k] = (mass[to] * c[to][k] + w * p[k]) / (mass[to] + w);
                }
                mass[from] -= w;
                mass[to] += w;
                labels[i] = to;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    centroids(cloud, labels)
}

/// Weighted 2-means: Lloyd iterations from k-means++ seeds, refined by
/// Hartigan single-point moves; the best of `restarts` runs wins, earlier
/// restarts winning ties.
pub fn two_means_axis<T: Scalar>(cloud: &OpinionCloud<T>, cfg: &TwoMeansConfig) -> Result<TwoMeansFit<T>> {
    let live: Vec<usize> = (0..cloud.len())
        .filter(|&i| cloud.weights[i] > T::zero())
        .collect();
    let first = &cloud.points[live[0]];
    if live.iter().all(|&i| cloud.points[i] == *first) {
        return Err(Error::Degenerate(
            "all weighted points coincide; no separating axis".into(),
        ));
    }
    let w64: Vec<f64> = cloud.weights.iter().map(|w| w.to_f64_lossy()).collect();
    let pick = WeightedIndex::new(&w64).map_err(|e| Error::Degenerate(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(T, Vec<usize>, [Vec<T>; 2])> = None;
    for _ in 0..cfg.restarts.max(1) {
        let a = cloud.points[pick.sample(&mut rng)].clone();
        let d2: Vec<f64> = cloud
            .points
            .iter()
            .zip(&w64)
            .map(|(p, &w)| w * dist2(p, &a).to_f64_lossy())
            .collect();
        let Ok(second) = WeightedIndex::new(&d2) else {
            continue;
        };
        let b = cloud.points[second.sample(&mut rng)].clone();
        let Some((mut labels, _)) = lloyd(cloud, [a, b], cfg.max_iter) else {
            continue;
        };
        let Some(c) = hartigan(cloud, &mut labels, cfg.max_iter) else {
            continue;
        };
        let obj = two_means_objective(cloud, &labels).expect("both clusters populated");
        if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
            best = Some((obj, labels, c));
        }
    }
    let (objective, mut labels, [mut c0, mut c1]) =
        best.ok_or_else(|| Error::NoConvergence("every 2-means restart lost a cluster".into()))?;
    let diff: Vec<T> = c0.iter().zip(&c1).map(|(&x, &y)| x - y).collect();
    let mut dir = normalize(&diff).ok_or_else(|| Error::Degenerate("coincident centroids".into()))?;
    canonical_sign(&mut dir, T::zero());
    if dot(&dir, &diff) < T::zero() {
        labels.iter_mut().for_each(|l| *l = 1 - *l);
        std::mem::swap(&mut c0, &mut c1);
    }
    Ok(TwoMeansFit {
        axis: ElectionAxis {
            direction: dir,
            provenance: AxisProvenance::TwoMeans,
        },
        labels,
        centroids: [c0, c1],
        objective,
    })
}

/// Exact 2-means by enumerating every two-way partition; feasible only for
/// small clouds (at most 24 points).
pub fn two_means_exhaustive<T: Scalar>(cloud: &OpinionCloud<T>) -> Result<(T, Vec<usize>)> {
    let n = cloud.len();
    if !(2..=24).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "exhaustive 2-means needs 2 to 24 points, got {n}"
        )));
    }
    let mut best: Option<(T, Vec<usize>)> = None;
    // point 0 fixed in cluster 0 removes the mirror partitions
    for mask in 1u32..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n)
            .map(|i| {
                if i == 0 {
                    0
                } else {
                    ((mask >> (i - 1)) & 1) as usize
                }
            })
            .collect();
        if let Some(obj) = two_means_objective(cloud, &labels) {
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, labels));
            }
        }
    }
    best.ok_or_else(|| Error::Degenerate("no partition with two weighted sides".into()))
}

/// Top principal component of the weighted covariance, sign-normalized.
pub fn pca_axis<T: Scalar>(cloud: &OpinionCloud<T>) -> Result<ElectionAxis<T>> {
    let cov = cloud.covariance();
    let trace = cov.trace();
    if trace <= T::zero() {
        return Err(Error::Degenerate("opinion cloud has zero variance".into()));
    }
    let eig = cov.symmetric_eigen(T::epsilon())?;
    if eig.values.len() > 1 && eig.values[0] - eig.values[1] < T::lit(1e-9) * trace {
        return Err(Error::Degenerate(format!(
            "top covariance eigenvalue {} is not separated from {}",
            eig.values[0], eig.values[1]
        )));
    }
    let mut dir = eig.vectors[0].clone();
    canonical_sign(&mut dir, T::zero());
    ElectionAxis::new(&dir, AxisProvenance::Pca)
}

fn check_weight<T: Scalar>(w: T, what: &str) -> Result<()> {
    if !(w >= T::zero() && w <= T::one()) {
        return Err(Error::InvalidParameter(format!("{what} {w} outside [0, 1]")));
    }
    Ok(())
}

fn combine<T: Scalar>(w: T, own: &[T], other: &[T]) -> Result<ElectionAxis<T>> {
    let v: Vec<T> = own
        .iter()
        .zip(other)
        .map(|(&a, &b)| w * a + (T::one() - w) * b)
        .collect();
    ElectionAxis::new(&v, AxisProvenance::Coupled)
}

/// Pairwise coupling: `ê'_a ∝ w_a ê_a + (1 − w_a) ê_b`, and symmetrically for `b`.
pub fn couple_axes<T: Scalar>(
    ea: &ElectionAxis<T>,
    eb: &ElectionAxis<T>,
    wa: T,
    wb: T,
) -> Result<(ElectionAxis<T>, ElectionAxis<T>)> {
    check_weight(wa, "w_a")?;
    check_weight(wb, "w_b")?;
    if ea.direction.len() != eb.direction.len() {
        return Err(Error::DimensionMismatch("axes of different dimension".into()));
    }
    Ok((
        combine(wa, &ea.direction, &eb.direction)?,
        combine(wb, &eb.direction, &ea.direction)?,
    ))
}

/// Interaction matrix between all elections and the elections of one scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleInteraction<T> {
    /// Indices (into the system's axis list) of this scale's elections.
    pub members: Vec<usize>,
    /// `weights[i][k]`: pull of election `i` toward member `k`. Each row sums
    /// to one over the members, or is entirely zero when `i` has no peers.
    pub weights: Vec<Vec<T>>,
}

/// Multilevel axis interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionSystem<T> {
    pub axes: Vec<ElectionAxis<T>>,
    pub scales: Vec<ScaleInteraction<T>>,
    /// Global self weight `w`.
    pub w: T,
    /// Optional per-election self weights replacing `w`.
    pub self_weights: Option<Vec<T>>,
}

impl<T: Scalar> InteractionSystem<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.axes.len();
        if n == 0 {
            return Err(Error::Empty("interaction system axes"));
        }
        let d = self.axes[0].direction.len();
        if self.axes.iter().any(|a| a.direction.len() != d) {
            return Err(Error::DimensionMismatch("axes of different dimension".into()));
        }
        check_weight(self.w, "w")?;
        if let Some(sw) = &self.self_weights {
            if sw.len() != n {
                return Err(Error::DimensionMismatch("one self weight per election".into()));
            }
            sw.iter().try_for_each(|&w| check_weight(w, "self weight"))?;
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        for (s, scale) in self.scales.iter().enumerate() {
            if let Some(&m) = scale.members.iter().find(|&&m| m >= n) {
                return Err(Error::OutOfRange { index: m, len: n });
            }
            if scale.weights.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "scale {s} interaction matrix needs {n} rows"
                )));
            }
            for (i, row) in scale.weights.iter().enumerate() {
                if row.len() != scale.members.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "scale {s} row {i} has {} entries for {} members",
                        row.len(),
                        scale.members.len()
                    )));
                }
                if row.iter().any(|&x| x < T::zero() || !x.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "scale {s} row {i} has a negative or non-finite weight"
                    )));
                }
                for (k, &m) in scale.members.iter().enumerate() {
                    if m == i && row[k] != T::zero() {
                        return Err(Error::InvalidParameter(format!(
                            "election {i} interacts with itself at scale {s}"
                        )));
                    }
                }
                let sum: T = row.iter().copied().sum();
                if sum != T::zero() && (sum - T::one()).abs() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "scale {s} row {i} sums to {sum}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }

    fn self_weight(&self, i: usize) -> T {
        self.self_weights.as_ref().map_or(self.w, |s| s[i])
    }
}

/// One synchronous update `e'_i = w ê_i + (1 − w) Σ_scales Σ_k M_ik ê_k`,
/// normalized.
pub fn multilevel_couple<T: Scalar>(system: &InteractionSystem<T>) -> Result<Vec<ElectionAxis<T>>> {
    system.validate()?;
    let d = system.axes[0].direction.len();
    (0..system.axes.len())
        .map(|i| {
            let w = system.self_weight(i);
            let mut pull = vec![T::zero(); d];
            for scale in &system.scales {
                for (k, &m) in scale.members.iter().enumerate() {
                    let a = scale.weights[i][k];
                    pull.iter_mut()
                        .zip(&system.axes[m].direction)
                        .for_each(|(p, &x)| *p += a * x);
                }
            }
            let v: Vec<T> = system.axes[i]
                .direction
                .iter()
                .zip(&pull)
                .map(|(&e, &p)| w * e + (T::one() - w) * p)
                .collect();
            ElectionAxis::new(&v, AxisProvenance::Coupled)
                .map_err(|_| Error::Degenerate(format!("coupled axis of election {i} has zero length")))
        })
        .collect()
}

/// Circular variance `1 − |(1/n) Σ (cos θ_i, sin θ_i)|` of the angles
/// `θ_i = arccos(ê_i · ê_N)`.
pub fn circular_dispersion<T: Scalar>(axes: &[ElectionAxis<T>], reference: &ElectionAxis<T>) -> Result<T> {
    if axes.is_empty() {
        return Err(Error::Empty("axes"));
    }
    let n = T::count(axes.len());
    let (mut c, mut s) = (T::zero(), T::zero());
    for a in axes {
        let theta = angle_between(&a.direction, &reference.direction);
        c += theta.cos();
        s += theta.sin();
    }
    Ok(T::one() - ((c / n).powi(2) + (s / n).powi(2)).sqrt())
}

/// The dispersion formula with squared cosines and sines inside the root,
/// kept for comparison. It equals `1 − 1/√n` for any angles.
pub fn circular_dispersion_squared_form<T: Scalar>(
    axes: &[ElectionAxis<T>],
    reference: &ElectionAxis<T>,
) -> Result<T> {
    if axes.is_empty() {
        return Err(Error::Empty("axes"));
    }
    let n = T::count(axes.len());
    let total: T = axes
        .iter()
        .map(|a| {
            let theta = angle_between(&a.direction, &reference.direction);
            theta.cos().powi(2) + theta.sin().powi(2)
        })
        .sum();
    Ok(T::one() - total.sqrt() / n)
}

/// Positions of the two candidates of one election.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair<T> {
    pub d: Vec<T>,
    pub r: Vec<T>,
}

impl<T: Scalar> CandidatePair<T> {
    pub fn new(d: Vec<T>, r: Vec<T>) -> Result<Self> {
        if d.len() != r.len() || d.is_empty() {
            return Err(Error::DimensionMismatch("candidate positions".into()));
        }
        Ok(CandidatePair { d, r })
    }

    /// `D − R`.
    pub fn difference(&self) -> Vec<T> {
        self.d.iter().zip(&self.r).map(|(&a, &b)| a - b).collect()
    }

    pub fn distance(&self) -> T {
        norm(&self.difference())
    }

    /// Axis from `R` to `D`.
    pub fn axis(&self) -> Result<ElectionAxis<T>> {
        ElectionAxis::new(&self.difference(), AxisProvenance::CandidatePair)
            .map_err(|_| Error::Degenerate("candidates coincide".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartisanMode {
    /// Every candidate is pulled toward the common center
    /// `Σ p_i (D_i + R_i) / 2`.
    AllConnected,
    /// Candidates are pulled toward their own party's mean `Σ p_i D_i` or
    /// `Σ p_i R_i`.
    WithinParty,
}

/// Moves every candidate a fraction `m` toward the mode's attractor.
pub fn partisan_transform<T: Scalar>(
    pairs: &[CandidatePair<T>],
    mode: PartisanMode,
    m: T,
    p: &[T],
) -> Result<Vec<CandidatePair<T>>> {
    check_weight(m, "m")?;
    if pairs.is_empty() {
        return Err(Error::Empty("candidate pairs"));
    }
    if p.len() != pairs.len() {
        return Err(Error::DimensionMismatch(
            "one salience weight per election".into(),
        ));
    }
    if p.iter().any(|&x| x < T::zero()) {
        return Err(Error::InvalidParameter("negative salience weight".into()));
    }
    let total: T = p.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(64.0)) {
        return Err(Error::InvalidParameter(format!(
            "salience weights sum to {total}"
        )));
    }
    let d = pairs[0].d.len();
    if pairs.iter().any(|q| q.d.len() != d || q.r.len() != d) {
        return Err(Error::DimensionMismatch("candidate positions".into()));
    }
    let mut mean_d = vec![T::zero(); d];
    let mut mean_r = vec![T::zero(); d];
    for (q, &w) in pairs.iter().zip(p) {
        mean_d.iter_mut().zip(&q.d).for_each(|(a, &x)| *a += w * x);
        mean_r.iter_mut().zip(&q.r).for_each(|(a, &x)| *a += w * x);
    }
    let (target_d, target_r) = match mode {
        PartisanMode::AllConnected => {
            let half = T::lit(0.5);
            let c: Vec<T> = mean_d
                .iter()
                .zip(&mean_r)
                .map(|(&a, &b)| half * (a + b))
                .collect();
            (c.clone(), c)
        }
        PartisanMode::WithinParty => (mean_d, mean_r),
    };
    let pull = |x: &[T], t: &[T]| -> Vec<T> {
        x.iter()
            .zip(t)
            .map(|(&a, &b)| b * m + a * (T::one() - m))
            .collect()
    };
    pairs
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let out = CandidatePair {
                d: pull(&q.d, &target_d),
                r: pull(&q.r, &target_r),
            };
            if out.d == out.r {
                return Err(Error::Degenerate(format!(
                    "candidates of election {i} coincide after the transform"
                )));
            }
            Ok(out)
        })
        .collect()
}

/// Per-axis variance `r² / n` of a uniform distribution on the sphere of
/// radius `r` in `ℝ^n`.
pub fn sphere_axis_variance<T: Scalar>(r: T, n: usize) -> Result<T> {
    if !(r > T::zero()) || n == 0 {
        return Err(Error::InvalidParameter("need r > 0 and n >= 1".into()));
    }
    Ok(r * r / T::count(n))
}

/// Monte Carlo estimate of the per-axis variances of `samples` uniform points
/// on the sphere of radius `r` in `ℝ^n` (normalized Gaussian draws).
pub fn sample_sphere_axis_variance(r: f64, n: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    if !(r > 0.0) || n == 0 || samples < 2 {
        return Err(Error::InvalidParameter(
            "need r > 0, n >= 1 and samples >= 2".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; n];
    let mut sum2 = vec![0.0; n];
    let mut x = vec![0.0; n];
    for _ in 0..samples {
        let len = loop {
            x.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let l = norm(&x);
            if l > 0.0 {
                break l;
            }
        };
        for k in 0..n {
            let v = r * x[k] / len;
            sum[k] += v;
            sum2[k] += v * v;
        }
    }
    let s = samples as f64;
    Ok((0..n).map(|k| sum2[k] / s - (sum[k] / s).powi(2)).collect())
}
