//! Effective opinions under social ties.
//!
//! A voter's effective opinion is a row-stochastic average of the opinions of
//! the voters they are tied to, `x' = T x`. Elections then act on the effective
//! distribution. This module covers the general matrix form, the closed forms
//! for fully connected and party-segregated electorates, and the multiscale
//! model where tie strength `w_n` applies within scale-`n` regions.

use std::io::Read;

use serde::Serialize;

use crate::election::{Mixture2, WeightedOpinions};
use crate::error::{Error, Result};
use crate::geo_hierarchy::{GeoUnit, Opinion, RegionTree};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::scale_variance::ScaleDecomposition;

fn row_tolerance<T: Scalar>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

/// Row-stochastic social connectivity matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TieMatrix<T> {
    m: Matrix<T>,
}

impl<T: Scalar> TieMatrix<T> {
    /// Validates row sums of one. Negative entries are rejected unless
    /// `allow_negative` is set.
    pub fn new(m: Matrix<T>, allow_negative: bool) -> Result<Self> {
        let tol = row_tolerance::<T>();
        for (i, row) in m.rows().iter().enumerate() {
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("tie matrix row {i}")));
            }
            if !allow_negative && row.iter().any(|&x| x < T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "tie matrix row {i} has a negative weight; enable negative ties explicitly"
                )));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "tie matrix row {i} sums to {s}, not 1"
                )));
            }
        }
        Ok(TieMatrix { m })
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, false)
    }

    pub fn identity(n: usize) -> Self {
        TieMatrix {
            m: Matrix::identity(n),
        }
    }

    /// Every row equal to `1/n`.
    pub fn uniform(n: usize) -> Self {
        let v = T::one() / T::count(n);
        TieMatrix {
            m: Matrix::from_rows(vec![vec![v; n]; n]).expect("square"),
        }
    }

    /// Self weight `1 − w`, weight `w / (n − 1)` on every other voter.
    pub fn fully_connected(n: usize, w: T) -> Result<Self> {
        Self::grouped(&vec![0; n], w)
    }

    /// Ties only within groups: self weight `1 − w`, the remaining `w` spread
    /// evenly over the other members of the voter's group.
    pub fn grouped(groups: &[usize], w: T) -> Result<Self> {
        check_unit_interval(w, "tie weight")?;
        let n = groups.len();
        let mut sizes = std::collections::HashMap::new();
        groups
            .iter()
            .for_each(|&g| *sizes.entry(g).or_insert(0usize) += 1);
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            let size = sizes[&groups[i]];
            if size == 1 {
                m[(i, i)] = T::one();
                continue;
            }
            let share = w / T::count(size - 1);
            for j in 0..n {
                m[(i, j)] = if i == j {
                    T::one() - w
                } else if groups[j] == groups[i] {
                    share
                } else {
                    T::zero()
                };
            }
        }
        Self::new(m, false)
    }

    /// Reads a dense headerless CSV of `n` rows with `n` values each.
    pub fn read_csv<R: Read>(input: R, allow_negative: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>().map(T::lit).map_err(|e| Error::Row {
                        line: line as u64 + 1,
                        message: format!("bad tie weight `{f}`: {e}"),
                    })
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Empty("tie matrix file"));
        }
        Self::new(Matrix::from_rows(rows)?, allow_negative)
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.m
    }
}

fn check_unit_interval<T: Scalar>(w: T, what: &str) -> Result<()> {
    if !(w >= T::zero() && w <= T::one()) {
        return Err(Error::InvalidParameter(format!("{what} {w} outside [0, 1]")));
    }
    Ok(())
}

fn check_len<T: Scalar>(t: &TieMatrix<T>, n: usize) -> Result<()> {
    if t.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "tie matrix is {0}x{0} but the vector has {n} entries",
            t.dim()
        )));
    }
    Ok(())
}

/// `x'_i = Σ_j T_ij x_j`.
pub fn effective_opinions<T: Scalar>(ties: &TieMatrix<T>, x: &[T]) -> Result<Vec<T>> {
    check_len(ties, x.len())?;
    Ok(ties.m.mul_vec(x))
}

/// Large-electorate fully connected transform of a sample:
/// `x' = x (1 − w) + w x̄`.
pub fn transform_fully_connected<T: Scalar>(
    opinions: &WeightedOpinions<T>,
    w: T,
) -> Result<WeightedOpinions<T>> {
    check_unit_interval(w, "social weight")?;
    let mean = opinions.mean();
    opinions.map_positions(|x| x * (T::one() - w) + w * mean)
}

/// Fully connected transform of a two-Gaussian mixture: both means move to
/// `x̄ w + μ (1 − w)` and the width shrinks to `σ (1 − w)` (zero at `w = 1`).
pub fn transform_fully_connected_mixture<T: Scalar>(mix: &Mixture2<T>, w: T) -> Result<Mixture2<T>> {
    check_unit_interval(w, "social weight")?;
    let mean = mix.mean();
    let keep = T::one() - w;
    Ok(Mixture2 {
        mu_a: mean * w + mix.mu_a * keep,
        mu_b: mean * w + mix.mu_b * keep,
        sigma: mix.sigma * keep,
        ..*mix
    })
}

/// Party-segregated transform of a sample: every voter is pulled with weight
/// `w` toward the mean of their own group.
pub fn transform_segregated<T: Scalar>(
    opinions: &WeightedOpinions<T>,
    groups: &[usize],
    w: T,
) -> Result<WeightedOpinions<T>> {
    check_unit_interval(w, "social weight")?;
    if groups.len() != opinions.len() {
        return Err(Error::DimensionMismatch(
            "one group label per voter required".into(),
        ));
    }
    let k = groups.iter().copied().max().unwrap_or(0) + 1;
    let mut mass = vec![T::zero(); k];
    let mut sum = vec![T::zero(); k];
    for ((&x, &wt), &g) in opinions.positions().iter().zip(opinions.weights()).zip(groups) {
        mass[g] += wt;
        sum[g] += wt * x;
    }
    let means: Vec<T> = sum
        .iter()
        .zip(&mass)
        .map(|(&s, &m)| if m > T::zero() { s / m } else { T::zero() })
        .collect();
    WeightedOpinions::new(
        opinions
            .positions()
            .iter()
            .zip(groups)
            .map(|(&x, &g)| x * (T::one() - w) + w * means[g])
            .collect(),
        opinions.weights().to_vec(),
    )
}

/// Party-segregated transform of a mixture: means fixed, width `σ (1 − w)`.
pub fn transform_segregated_mixture<T: Scalar>(mix: &Mixture2<T>, w: T) -> Result<Mixture2<T>> {
    check_unit_interval(w, "social weight")?;
    Ok(Mixture2 {
        sigma: mix.sigma * (T::one() - w),
        ..*mix
    })
}

/// `Ĵ = (μ_A − μ_B)² (1 − w)² / (4 (σ² (1 − w)² + a²))`.
pub fn j_fully_connected<T: Scalar>(mix: &Mixture2<T>, a: T, w: T) -> T {
    let d = mix.mu_a - mix.mu_b;
    let k = (T::one() - w) * (T::one() - w);
    d * d * k / (T::lit(4.0) * (mix.sigma * mix.sigma * k + a * a))
}

/// `Ĵ = (μ_A − μ_B)² / (4 (σ² (1 − w)² + a²))`.
pub fn j_segregated<T: Scalar>(mix: &Mixture2<T>, a: T, w: T) -> T {
    let d = mix.mu_a - mix.mu_b;
    let k = (T::one() - w) * (T::one() - w);
    d * d / (T::lit(4.0) * (mix.sigma * mix.sigma * k + a * a))
}

/// Tie strengths `w_1 … w_{N+1}` within regions of each scale; the last one
/// spans the whole population.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleWeights<T> {
    w: Vec<T>,
}

impl<T: Scalar> ScaleWeights<T> {
    pub fn new(w: Vec<T>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Empty("scale weights"));
        }
        for &x in &w {
            check_unit_interval(x, "scale weight")?;
        }
        let total: T = w.iter().copied().sum();
        if total > T::one() + row_tolerance::<T>() {
            return Err(Error::InvalidParameter(format!(
                "scale weights sum to {total}, exceeding 1"
            )));
        }
        Ok(ScaleWeights { w })
    }

    pub fn weights(&self) -> &[T] {
        &self.w
    }

    /// Self weight `β = 1 − Σ w_j`.
    pub fn beta(&self) -> T {
        (T::one() - self.w.iter().copied().sum::<T>()).max(T::zero())
    }

    /// `(1 − Σ_{i ≥ k} w_i)²` for 0-based term `k`.
    pub fn factor(&self, k: usize) -> T {
        let tail: T = self.w[k..].iter().copied().sum();
        let f = T::one() - tail;
        f * f
    }
}

/// Effective multiscale decomposition: the term added at scale `k` is scaled
/// by `(1 − Σ_{i ≥ k} w_i)²`, so only ties spanning larger scales shrink it.
pub fn multiscale_effective_variance<T: Scalar>(
    dec: &ScaleDecomposition<T>,
    w: &ScaleWeights<T>,
) -> Result<ScaleDecomposition<T>> {
    if w.weights().len() != dec.added.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scale weights for {} decomposition terms",
            w.weights().len(),
            dec.added.len()
        )));
    }
    let added: Vec<T> = dec
        .added
        .iter()
        .enumerate()
        .map(|(k, &a)| a * w.factor(k))
        .collect();
    Ok(ScaleDecomposition {
        total: added.iter().copied().sum(),
        added,
        normalizer: dec.normalizer,
        groups: dec.groups.clone(),
    })
}

/// Per-unit multiscale effective opinions
/// `x' = β x + w_1 x̄_{scale 1} + … + w_N x̄_{scale N} + w_{N+1} x̄`,
/// with population-weighted region means.
pub fn multiscale_effective_units<T: Scalar>(
    tree: &RegionTree,
    units: &[GeoUnit<T>],
    w: &ScaleWeights<T>,
) -> Result<Vec<GeoUnit<T>>> {
    tree.check_units(units)?;
    let n_levels = tree.levels();
    if w.weights().len() != n_levels + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} scale weights for a {n_levels}-level tree (expected {})",
            w.weights().len(),
            n_levels + 1
        )));
    }
    let x: Vec<T> = units
        .iter()
        .map(|u| {
            u.value
                .as_scalar()
                .ok_or_else(|| Error::DimensionMismatch(format!("unit `{}` carries a vector opinion", u.id)))
        })
        .collect::<Result<_>>()?;
    let region_means = |labels: &[usize], count: usize| {
        let mut mass = vec![T::zero(); count];
        let mut sum = vec![T::zero(); count];
        for (u, &r) in labels.iter().enumerate() {
            mass[r] += units[u].population;
            sum[r] += units[u].population * x[u];
        }
        sum.iter()
            .zip(&mass)
            .map(|(&s, &m)| if m > T::zero() { s / m } else { T::zero() })
            .collect::<Vec<T>>()
    };
    let mut means: Vec<Vec<T>> = (1..=n_levels)
        .map(|s| region_means(tree.level(s), tree.region_count(s)))
        .collect();
    means.push(region_means(&vec![0; units.len()], 1));
    let beta = w.beta();
    Ok(units
        .iter()
        .enumerate()
        .map(|(u, unit)| {
            let mut v = beta * x[u];
            for (s, &ws) in w.weights().iter().enumerate() {
                let r = if s < n_levels { tree.region(s + 1, u) } else { 0 };
                v += ws * means[s][r];
            }
            GeoUnit {
                value: Opinion::Scalar(v),
                ..unit.clone()
            }
        })
        .collect())
}

/// Effective `J` for the two-scale example: state 1 has identical bimodal
/// counties (means `±Δ`), state 2 has unimodal counties split between `±Δ`.
/// Returns `(Δ² β² / (σ² β² + a²), Δ² (1 − w₂)² / (σ² β² + a²))` with
/// `β = 1 − w₁ − w₂`.
pub fn two_state_j<T: Scalar>(delta: T, sigma: T, a: T, w1: T, w2: T) -> Result<(T, T)> {
    check_unit_interval(w1, "w1")?;
    check_unit_interval(w2, "w2")?;
    if w1 + w2 > T::one() + row_tolerance::<T>() {
        return Err(Error::InvalidParameter("w1 + w2 exceeds 1".into()));
    }
    if !(sigma > T::zero() && a > T::zero()) {
        return Err(Error::InvalidParameter("sigma and a must be positive".into()));
    }
    let beta = (T::one() - w1 - w2).max(T::zero());
    let denom = sigma * sigma * beta * beta + a * a;
    let d2 = delta * delta;
    let keep = T::one() - w2;
    Ok((d2 * beta * beta / denom, d2 * keep * keep / denom))
}

/// Per-voter representation under ties: `r_i = Σ_j T_ji r(f̂, x'_j)`.
pub fn representation_under_ties<T: Scalar>(ties: &TieMatrix<T>, base: &[T]) -> Result<Vec<T>> {
    check_len(ties, base.len())?;
    Ok(ties.m.transpose().mul_vec(base))
}

/// Social representation `r_i / T_ii`: outcome change per unit change of the
/// voter's effective opinion.
pub fn social_representation<T: Scalar>(ties: &TieMatrix<T>, i: usize, r_i: T) -> Result<T> {
    if i >= ties.dim() {
        return Err(Error::OutOfRange {
            index: i,
            len: ties.dim(),
        });
    }
    let tii = ties.get(i, i);
    if tii == T::zero() {
        return Err(Error::Degenerate(format!(
            "voter {i} places no weight on their own opinion"
        )));
    }
    Ok(r_i / tii)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_uniform_ties() {
        let x = [1.0f64, -2.0, 4.0, 0.5];
        assert_eq!(
            effective_opinions(&TieMatrix::identity(4), &x).unwrap(),
            x.to_vec()
        );
        let m = x.iter().sum::<f64>() / 4.0;
        for v in effective_opinions(&TieMatrix::uniform(4), &x).unwrap() {
            assert!((v - m).abs() < 1e-15);
        }
    }

    #[test]
    fn row_sums_and_signs_enforced() {
        assert!(TieMatrix::from_rows(vec![vec![0.5f64, 0.4], vec![0.0, 1.0]]).is_err());
        let neg = Matrix::from_rows(vec![vec![1.2f64, -0.2], vec![0.0, 1.0]]).unwrap();
        assert!(TieMatrix::new(neg.clone(), false).is_err());
        assert!(TieMatrix::new(neg, true).is_ok());
        assert!(effective_opinions(&TieMatrix::<f64>::identity(2), &[1.0]).is_err());
    }

    #[test]
    fn grouped_ties_pull_toward_group_mean() {
        let t = TieMatrix::grouped(&[0, 0, 1, 1], 0.5f64).unwrap();
        let x = [1.0, 3.0, -2.0, -4.0];
        let y = effective_opinions(&t, &x).unwrap();
        assert_eq!(y, vec![2.0, 2.0, -3.0, -3.0]);
    }

    #[test]
    fn dense_csv() {
        let text = "0.5, 0.5\n0.25,0.75\n";
        let t = TieMatrix::<f64>::read_csv(text.as_bytes(), false).unwrap();
        assert_eq!(t.get(1, 1), 0.75);
        assert!(TieMatrix::<f64>::read_csv("0.5,x\n".as_bytes(), false).is_err());
        assert!(TieMatrix::<f64>::read_csv("".as_bytes(), false).is_err());
    }

    #[test]
    fn fully_connected_endpoints() {
        let o = WeightedOpinions::uniform(vec![-1.0f64, 0.0, 3.0]).unwrap();
        assert_eq!(transform_fully_connected(&o, 0.0).unwrap(), o);
        let collapsed = transform_fully_connected(&o, 1.0).unwrap();
        assert!(collapsed
            .positions()
            .iter()
            .all(|&x| (x - 2.0 / 3.0).abs() < 1e-15));
        assert_eq!(collapsed.variance(), 0.0);
        assert!(transform_fully_connected(&o, 1.5).is_err());
    }

    #[test]
    fn mixture_transform_variance_law() {
        let mix = Mixture2::new(0.3f64, 0.7, 1.0, -2.0, 0.8).unwrap();
        let t = transform_fully_connected_mixture(&mix, 0.5).unwrap();
        assert!((t.variance() - 0.25 * mix.variance()).abs() < 1e-15);
        assert!((t.mean() - mix.mean()).abs() < 1e-15);
        let s = transform_segregated_mixture(&mix, 0.5).unwrap();
        assert_eq!((s.mu_a, s.mu_b, s.sigma), (1.0, -2.0, 0.4));
    }

    #[test]
    fn j_variants_by_substitution() {
        let mix = Mixture2::new(0.5f64, 0.5, 1.0, -1.0, 1.0).unwrap();
        assert!((j_fully_connected(&mix, 1.0, 0.5) - 0.2).abs() < 1e-15);
        assert!((j_segregated(&mix, 1.0, 0.5) - 0.8).abs() < 1e-15);
        let j = crate::election::polarization_j(&mix, 1.0);
        assert_eq!(j, 0.5);
        assert_eq!(j_fully_connected(&mix, 1.0, 0.0), j);
        assert_eq!(j_segregated(&mix, 1.0, 0.0), j);
    }

    #[test]
    fn scale_weight_validation() {
        assert!(ScaleWeights::new(vec![0.6f64, 0.5]).is_err());
        assert!(ScaleWeights::new(vec![-0.1f64]).is_err());
        let w = ScaleWeights::new(vec![0.2f64, 0.3]).unwrap();
        assert!((w.beta() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn multiscale_substitution() {
        let dec = ScaleDecomposition {
            added: vec![1.0f64, 1.0],
            total: 2.0,
            normalizer: None,
            groups: vec![4, 2],
        };
        let w = ScaleWeights::new(vec![0.5, 0.0]).unwrap();
        let out = multiscale_effective_variance(&dec, &w).unwrap();
        assert_eq!(out.added, vec![0.25, 1.0]);
        assert_eq!(out.total, 1.25);
        let zero = ScaleWeights::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(
            multiscale_effective_variance(&dec, &zero).unwrap().added,
            dec.added
        );
        let short = ScaleWeights::new(vec![0.1]).unwrap();
        assert!(multiscale_effective_variance(&dec, &short).is_err());
    }

    #[test]
    fn two_state_by_substitution() {
        let (s1, s2) = two_state_j(1.0f64, 1.0, 1.0, 0.5, 0.0).unwrap();
        assert!((s1 - 0.2).abs() < 1e-15 && (s2 - 0.8).abs() < 1e-15);
        let (z1, z2) = two_state_j(1.0f64, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!((z1, z2), (0.5, 0.5));
        assert!(two_state_j(1.0f64, 1.0, 1.0, 0.7, 0.5).is_err());
    }

    #[test]
    fn representation_under_identity_and_uniform() {
        let base = [0.1f64, 0.2, 0.7];
        assert_eq!(
            representation_under_ties(&TieMatrix::identity(3), &base).unwrap(),
            base.to_vec()
        );
        let r = representation_under_ties(&TieMatrix::uniform(3), &[1.0f64 / 3.0; 3]).unwrap();
        assert!(r.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn social_representation_cases() {
        let t = TieMatrix::<f64>::identity(2);
        assert_eq!(social_representation(&t, 0, 0.3).unwrap(), 0.3);
        let u = TieMatrix::<f64>::uniform(4);
        assert!((social_representation(&u, 2, 0.25).unwrap() - 1.0).abs() < 1e-15);
        let z = TieMatrix::from_rows(vec![vec![0.0f64, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            social_representation(&z, 0, 0.5),
            Err(Error::Degenerate(_))
        ));
    }
}
