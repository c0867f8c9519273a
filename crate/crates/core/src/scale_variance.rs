//! Population-weighted multiscale decomposition of opinion variance.
//!
//! For a tree with `N` nested scales the total variance splits into `N + 1`
//! nonnegative terms. Term `k` (0-based) is the variance added at scale
//! `k + 1`: the population-weighted spread of the scale-`k` means around the
//! mean of their enclosing scale-`k + 1` region, where scale 0 is the units
//! themselves and scale `N + 1` is the whole population. Term 0 is therefore
//! the mean within-region variance of the finest regions and term `N` is the
//! variance between the coarsest regions.
//!
//! Every expectation is weighted by unit population and uses the population
//! (not sample) variance. Means are computed first and squared deviations in
//! a second pass, which keeps the terms summing to the directly computed
//! variance to near machine precision.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geo_hierarchy::{GeoUnit, RegionTree};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Added variance per scale for scalar opinions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleDecomposition<T> {
    /// `added[k]` is the variance added at scale `k + 1`; length `N + 1`.
    pub added: Vec<T>,
    /// Directly computed weighted variance of all unit values.
    pub total: T,
    /// `p (1 - p)` once [`ScaleDecomposition::normalized`] has been applied.
    pub normalizer: Option<T>,
    /// `groups[k]` is the number of scale-`k` regions whose means are spread
    /// by `added[k]` (scale 0 being the units).
    pub groups: Vec<usize>,
}

/// Added covariance matrix per scale for vector opinions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovDecomposition<T> {
    pub added: Vec<Matrix<T>>,
    pub total: Matrix<T>,
    pub groups: Vec<usize>,
}

/// Means of each region at each scale plus the added second moments.
struct Moments<T> {
    added: Vec<Matrix<T>>,
    total: Matrix<T>,
    groups: Vec<usize>,
}

fn weights<T: Scalar>(units: &[GeoUnit<T>]) -> Result<Vec<T>> {
    if units.is_empty() {
        return Err(Error::Empty("no units"));
    }
    let mut total = T::zero();
    for u in units {
        if !(u.population >= T::zero()) || !u.population.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "population of unit `{}` must be finite and nonnegative",
                u.id
            )));
        }
        total += u.population;
    }
    if total <= T::zero() {
        return Err(Error::InvalidParameter("total population is zero".into()));
    }
    Ok(units.iter().map(|u| u.population / total).collect())
}

fn values<T: Scalar>(units: &[GeoUnit<T>]) -> Result<(usize, Vec<&[T]>)> {
    let d = units[0].value.dim();
    let vals: Vec<&[T]> = units.iter().map(|u| u.value.as_slice()).collect();
    for (u, v) in units.iter().zip(&vals) {
        if v.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "unit `{}` has opinion dimension {}, expected {d}",
                u.id,
                v.len()
            )));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite(format!("value of unit `{}`", u.id)));
        }
    }
    if d == 0 {
        return Err(Error::DimensionMismatch("zero-dimensional opinions".into()));
    }
    Ok((d, vals))
}

/// Weighted means of `points` grouped by `group`; empty-weight groups get 0.
fn group_means<T: Scalar>(
    points: &[&[T]],
    w: &[T],
    group: impl Fn(usize) -> usize,
    count: usize,
    d: usize,
) -> (Vec<Vec<T>>, Vec<T>) {
    let mut mass = vec![T::zero(); count];
    let mut sums = vec![vec![T::zero(); d]; count];
    for (i, (p, &wi)) in points.iter().zip(w).enumerate() {
        let g = group(i);
        mass[g] += wi;
        sums[g].iter_mut().zip(p.iter()).for_each(|(s, &x)| *s += wi * x);
    }
    for (s, &m) in sums.iter_mut().zip(&mass) {
        if m > T::zero() {
            s.iter_mut().for_each(|x| *x /= m);
        }
    }
    (sums, mass)
}

fn spread<T: Scalar>(
    points: &[&[T]],
    w: &[T],
    centers: &[Vec<T>],
    group: impl Fn(usize) -> usize,
    d: usize,
) -> Matrix<T> {
    let mut m = Matrix::zeros(d);
    let mut dev = vec![T::zero(); d];
    for (i, (p, &wi)) in points.iter().zip(w).enumerate() {
        let c = &centers[group(i)];
        dev.iter_mut()
            .zip(p.iter().zip(c))
            .for_each(|(e, (&x, &mu))| *e = x - mu);
        m.add_outer(wi, &dev, &dev);
    }
    m
}

fn moments<T: Scalar>(tree: &RegionTree, units: &[GeoUnit<T>]) -> Result<Moments<T>> {
    tree.check_units(units)?;
    let w = weights(units)?;
    let (d, vals) = values(units)?;
    let n_levels = tree.levels();

    // means[s] holds the scale-s region means, s = 1..=N+1
    let mut means: Vec<Vec<Vec<T>>> = Vec::with_capacity(n_levels + 1);
    for s in 1..=n_levels {
        let level = tree.level(s);
        means.push(group_means(&vals, &w, |u| level[u], tree.region_count(s), d).0);
    }
    let (grand, _) = group_means(&vals, &w, |_| 0, 1, d);
    means.push(grand);

    let mut added = Vec::with_capacity(n_levels + 1);
    let finest = tree.level(1);
    added.push(spread(&vals, &w, &means[0], |u| finest[u], d));
    for s in 1..=n_levels {
        // scale-s region means spread around their scale-(s+1) parents
        let count = tree.region_count(s);
        let level = tree.level(s);
        let mut mass = vec![T::zero(); count];
        for (u, &wu) in w.iter().enumerate() {
            mass[level[u]] += wu;
        }
        let pts: Vec<&[T]> = means[s - 1].iter().map(|m| m.as_slice()).collect();
        added.push(spread(&pts, &mass, &means[s], |r| tree.parent(s, r), d));
    }
    let total = spread(&vals, &w, &means[n_levels], |_| 0, d);
    let mut groups = vec![units.len()];
    groups.extend((1..=n_levels).map(|s| tree.region_count(s)));
    Ok(Moments { added, total, groups })
}

/// Decomposes the population-weighted variance of scalar unit values over the
/// scales of `tree`.
pub fn decompose<T: Scalar>(tree: &RegionTree, units: &[GeoUnit<T>]) -> Result<ScaleDecomposition<T>> {
    if let Some(u) = units.iter().find(|u| u.value.as_scalar().is_none()) {
        return Err(Error::DimensionMismatch(format!(
            "unit `{}` carries a vector opinion; use decompose_cov",
            u.id
        )));
    }
    let m = moments(tree, units)?;
    Ok(ScaleDecomposition {
        added: m.added.iter().map(|a| a[(0, 0)]).collect(),
        total: m.total[(0, 0)],
        normalizer: None,
        groups: m.groups,
    })
}

/// Like [`decompose`], but treats every unit value as the share `v` of a
/// population of binary voters, prepending the within-unit Bernoulli
/// variance `E[v (1 - v)]` as the finest term.
///
/// The scales shift by one: scale 1 becomes the units themselves. For
/// two-party returns the total equals `p̄ (1 - p̄)`.
pub fn decompose_bernoulli<T: Scalar>(
    tree: &RegionTree,
    units: &[GeoUnit<T>],
) -> Result<ScaleDecomposition<T>> {
    let mut dec = decompose(tree, units)?;
    let w = weights(units)?;
    let mut within = T::zero();
    for (u, &wu) in units.iter().zip(&w) {
        let v = u.value.as_scalar().unwrap_or_else(T::nan);
        if !(T::zero()..=T::one()).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "unit `{}` value {v} is not a share in [0, 1]",
                u.id
            )));
        }
        within += wu * v * (T::one() - v);
    }
    let individuals: T = units.iter().map(|u| u.population).sum();
    dec.added.insert(0, within);
    dec.total += within;
    dec.groups
        .insert(0, individuals.round().to_usize().unwrap_or(usize::MAX));
    Ok(dec)
}

/// Decomposes the population-weighted covariance of vector unit values.
pub fn decompose_cov<T: Scalar>(tree: &RegionTree, units: &[GeoUnit<T>]) -> Result<CovDecomposition<T>> {
    let m = moments(tree, units)?;
    Ok(CovDecomposition {
        added: m.added,
        total: m.total,
        groups: m.groups,
    })
}

impl<T: Scalar> ScaleDecomposition<T> {
    /// Number of nested scales `N`.
    pub fn levels(&self) -> usize {
        self.added.len() - 1
    }

    pub fn sum_added(&self) -> T {
        self.added.iter().copied().sum()
    }

    fn check_scale(&self, n: usize) -> Result<()> {
        if n > self.levels() + 1 {
            return Err(Error::OutOfRange {
                index: n,
                len: self.levels() + 2,
            });
        }
        Ok(())
    }

    /// Mean variance within scale-`n` regions, `E(Var(z | W_n))`: the sum of
    /// the first `n` added terms. `n = 0` gives 0 and `n = N + 1` the total.
    pub fn cumulative_within(&self, n: usize) -> Result<T> {
        self.check_scale(n)?;
        Ok(self.added[..n].iter().fold(T::zero(), |a, &b| a + b))
    }

    /// Variance between scale-`n` regions, `Var(E(z | W_n))`: the added terms
    /// from index `n` upward. Complement of [`Self::cumulative_within`].
    pub fn cumulative_above(&self, n: usize) -> Result<T> {
        self.check_scale(n)?;
        Ok(self.added[n..].iter().fold(T::zero(), |a, &b| a + b))
    }

    /// Divides every term by `p (1 - p)` for a winning vote share `p`.
    pub fn normalized(&self, p: T) -> Result<Self> {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "winning share {p} must lie strictly between 0 and 1"
            )));
        }
        let norm = p * (T::one() - p);
        Ok(ScaleDecomposition {
            added: self.added.iter().map(|&a| a / norm).collect(),
            total: self.total / norm,
            normalizer: Some(norm),
            groups: self.groups.clone(),
        })
    }

    /// Fraction of the total variance held within scale-`n` regions.
    pub fn within_share(&self, n: usize) -> Result<T> {
        Ok(self.cumulative_within(n)? / self.sum_added())
    }

    /// Writes `scale,groups,added,cumulative_within,cumulative_above,normalized`.
    ///
    /// Row `k` describes scale `k + 1`; `cumulative_within` and
    /// `cumulative_above` are evaluated at that scale. The first four value
    /// columns are raw variances; `normalized` is the added term divided by
    /// `p (1 - p)` (empty when not normalized).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scale",
            "groups",
            "added",
            "cumulative_within",
            "cumulative_above",
            "normalized",
        ])?;
        let raw = |x: T| self.normalizer.map_or(x, |n| x * n);
        for (k, &a) in self.added.iter().enumerate() {
            let normalized = self.normalizer.map(|_| a.to_string()).unwrap_or_default();
            w.write_record([
                (k + 1).to_string(),
                self.groups[k].to_string(),
                raw(a).to_string(),
                raw(self.cumulative_within(k + 1)?).to_string(),
                raw(self.cumulative_above(k + 1)?).to_string(),
                normalized,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl<T: Scalar> CovDecomposition<T> {
    pub fn sum_added(&self) -> Matrix<T> {
        let d = self.total.dim();
        self.added.iter().fold(Matrix::zeros(d), |mut acc, m| {
            acc.add_assign(m);
            acc
        })
    }

    /// Scalar decomposition of the opinions projected on unit direction `e`.
    pub fn project(&self, e: &[T]) -> ScaleDecomposition<T> {
        ScaleDecomposition {
            added: self.added.iter().map(|m| m.bilinear(e, e)).collect(),
            total: self.total.bilinear(e, e),
            normalizer: None,
            groups: self.groups.clone(),
        }
    }
}

/// Population-weighted mean squared distance between unit values and an
/// outcome `y`. Minimized at the weighted mean, where it equals the variance.
pub fn resolution_cost<T: Scalar>(units: &[GeoUnit<T>], y: T) -> Result<T> {
    let w = weights(units)?;
    let mut cost = T::zero();
    for (u, &wu) in units.iter().zip(&w) {
        let x = u
            .value
            .as_scalar()
            .ok_or_else(|| Error::DimensionMismatch(format!("unit `{}` carries a vector opinion", u.id)))?;
        cost += wu * (x - y) * (x - y);
    }
    Ok(cost)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter(
            "slope fit needs at least two paired points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|&v| !(v > T::zero())) {
        return Err(Error::InvalidParameter(
            "log-log fit needs positive values".into(),
        ));
    }
    let lx: Vec<T> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|y| y.ln()).collect();
    let n = T::count(xs.len());
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let sxy: T = lx.iter().zip(&ly).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let sxx: T = lx.iter().map(|&x| (x - mx) * (x - mx)).sum();
    if sxx <= T::zero() {
        return Err(Error::Degenerate("all x values coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Between-group variance `Var(E(z | W_s))` against mean group size for every
/// scale `s = 1..=N`, as `(group_size, variance)` pairs.
pub fn between_group_profile<T: Scalar>(dec: &ScaleDecomposition<T>) -> Vec<(T, T)> {
    let n_units = T::count(dec.groups[0]);
    (1..=dec.levels())
        .map(|s| {
            let size = n_units / T::count(dec.groups[s]);
            (size, dec.cumulative_above(s).expect("scale in range"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_hierarchy::build_random_hierarchy;

    fn unit(i: usize, pop: f64, v: f64) -> GeoUnit<f64> {
        GeoUnit::scalar(format!("u{i}"), [i as f64, 0.0], pop, v)
    }

    #[test]
    fn constant_values_give_zero_terms() {
        let units: Vec<_> = (0..8).map(|i| unit(i, 1.0 + i as f64, 0.3)).collect();
        let tree = build_random_hierarchy(&units, 2, 1).unwrap();
        let dec = decompose(&tree, &units).unwrap();
        assert!(dec.added.iter().all(|&a| a.abs() < 1e-15));
        assert!(dec.total.abs() < 1e-15);
    }

    #[test]
    fn two_point_distribution() {
        let units = vec![
            unit(0, 1.0, 0.0),
            unit(1, 1.0, 0.0),
            unit(2, 1.0, 1.0),
            unit(3, 1.0, 1.0),
        ];
        let tree = RegionTree::from_assignments(vec![vec![0, 0, 1, 1]]).unwrap();
        let dec = decompose(&tree, &units).unwrap();
        assert_eq!(dec.added, vec![0.0, 0.25]);
        assert_eq!(dec.total, 0.25);
        assert_eq!(dec.groups, vec![4, 2]);
    }

    #[test]
    fn cumulative_endpoints() {
        let units: Vec<_> = (0..16).map(|i| unit(i, 1.0, (i * i % 7) as f64)).collect();
        let tree = build_random_hierarchy(&units, 3, 9).unwrap();
        let dec = decompose(&tree, &units).unwrap();
        let n = dec.levels();
        assert_eq!(dec.cumulative_within(0).unwrap(), 0.0);
        assert_eq!(dec.cumulative_above(n + 1).unwrap(), 0.0);
        assert!((dec.cumulative_within(n + 1).unwrap() - dec.total).abs() < 1e-12);
        assert!((dec.cumulative_above(0).unwrap() - dec.total).abs() < 1e-12);
        assert!(matches!(
            dec.cumulative_within(n + 2),
            Err(Error::OutOfRange { .. })
        ));
        assert!(dec.cumulative_above(n + 2).is_err());
    }

    #[test]
    fn normalization() {
        let units = vec![
            unit(0, 1.0, 0.0),
            unit(1, 1.0, 0.0),
            unit(2, 1.0, 1.0),
            unit(3, 1.0, 1.0),
        ];
        let tree = RegionTree::from_assignments(vec![vec![0, 0, 1, 1]]).unwrap();
        let dec = decompose(&tree, &units).unwrap();
        let n = dec.normalized(0.5).unwrap();
        assert_eq!(n.added, vec![0.0, 1.0]);
        assert_eq!(n.total, 1.0);
        assert_eq!(n.normalizer, Some(0.25));
        assert!(dec.normalized(0.0).is_err());
        assert!(dec.normalized(1.0).is_err());
    }

    #[test]
    fn errors() {
        let units = vec![unit(0, 0.0, 0.1), unit(1, 0.0, 0.2)];
        let tree = RegionTree::from_assignments(vec![vec![0, 1]]).unwrap();
        assert!(decompose(&tree, &units).is_err());
        let three = vec![unit(0, 1.0, 0.1), unit(1, 1.0, 0.2), unit(2, 1.0, 0.3)];
        assert!(matches!(
            decompose(&tree, &three),
            Err(Error::DimensionMismatch(_))
        ));
        let ragged = vec![
            GeoUnit::vector("a", [0.0, 0.0], 1.0, vec![1.0, 2.0]),
            GeoUnit::vector("b", [0.0, 0.0], 1.0, vec![1.0]),
        ];
        assert!(decompose_cov(&tree, &ragged).is_err());
        assert!(resolution_cost::<f64>(&[], 0.0).is_err());
    }

    #[test]
    fn resolution_cost_bias_variance() {
        let units: Vec<_> = (0..10)
            .map(|i| unit(i, 1.0 + (i % 3) as f64, (i as f64).sin()))
            .collect();
        let tree = RegionTree::from_assignments(vec![vec![0; 10]]).unwrap();
        let var = decompose(&tree, &units).unwrap().total;
        let pops: f64 = units.iter().map(|u| u.population).sum();
        let mean: f64 = units
            .iter()
            .map(|u| u.population * u.value.as_scalar().unwrap())
            .sum::<f64>()
            / pops;
        assert!((resolution_cost(&units, mean).unwrap() - var).abs() < 1e-14);
        assert!((resolution_cost(&units, mean + 0.3).unwrap() - (var + 0.09)).abs() < 1e-14);
    }

    #[test]
    fn bernoulli_total_is_binary_variance() {
        let units = vec![unit(0, 100.0, 0.6), unit(1, 50.0, 0.2), unit(2, 50.0, 0.9)];
        let tree = RegionTree::from_assignments(vec![vec![0, 1, 1]]).unwrap();
        let dec = decompose_bernoulli(&tree, &units).unwrap();
        let p = (60.0 + 10.0 + 45.0) / 200.0;
        assert!((dec.total - p * (1.0 - p)).abs() < 1e-15);
        assert!((dec.sum_added() - dec.total).abs() < 1e-15);
        assert_eq!(dec.added.len(), 3);
        assert_eq!(dec.groups[0], 200);
    }

    #[test]
    fn loglog_slope_of_power_law() {
        let xs: Vec<f64> = (1..10).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 / x).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn csv_columns() {
        let units = vec![
            unit(0, 1.0, 0.0),
            unit(1, 1.0, 0.0),
            unit(2, 1.0, 1.0),
            unit(3, 1.0, 1.0),
        ];
        let tree = RegionTree::from_assignments(vec![vec![0, 0, 1, 1]]).unwrap();
        let dec = decompose(&tree, &units).unwrap().normalized(0.5).unwrap();
        let mut buf = Vec::new();
        dec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[0],
            "scale,groups,added,cumulative_within,cumulative_above,normalized"
        );
        assert_eq!(lines[2], "2,2,0.25,0.25,0,1");
    }

    #[test]
    fn works_in_f32() {
        let units: Vec<GeoUnit<f32>> = (0..8)
            .map(|i| GeoUnit::scalar(format!("u{i}"), [i as f32, 0.0], 1.0, (i % 3) as f32))
            .collect();
        let tree = build_random_hierarchy(&units, 2, 5).unwrap();
        let dec = decompose(&tree, &units).unwrap();
        assert!((dec.sum_added() - dec.total).abs() < 1e-5);
    }
}
