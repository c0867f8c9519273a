//! Multidimensional representation `r_μν = ∂y_μ / ∂x_ν` of one voter.
//!
//! Row `μ` is the outcome direction and column `ν` the direction of the
//! voter's opinion change. The tensor is estimated by central differences on
//! an arbitrary election map `cloud → ℝ^d`.

use serde::Serialize;

use crate::axes::OpinionCloud;
use crate::election::{Electorate, WeightedOpinions};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, norm, normalize, Scalar};

/// Outcome of a multidimensional election.
pub trait MultiElection<T> {
    fn outcome(&self, cloud: &OpinionCloud<T>) -> Result<Vec<T>>;
}

impl<T, F> MultiElection<T> for F
where
    F: Fn(&OpinionCloud<T>) -> Result<Vec<T>>,
{
    fn outcome(&self, cloud: &OpinionCloud<T>) -> Result<Vec<T>> {
        self(cloud)
    }
}

/// Weighted mean of the cloud.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanElection;

impl<T: Scalar> MultiElection<T> for MeanElection {
    fn outcome(&self, cloud: &OpinionCloud<T>) -> Result<Vec<T>> {
        Ok(cloud.mean())
    }
}

/// Lower weighted median of every coordinate separately.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoordinateMedianElection;

impl<T: Scalar> MultiElection<T> for CoordinateMedianElection {
    fn outcome(&self, cloud: &OpinionCloud<T>) -> Result<Vec<T>> {
        (0..cloud.dim())
            .map(|k| {
                let column = cloud.points().iter().map(|p| p[k]).collect();
                Ok(WeightedOpinions::new(column, cloud.weights().to_vec())?.median())
            })
            .collect()
    }
}

/// `d × d` Jacobian of the outcome with respect to one voter's opinion.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RepTensor<T> {
    pub matrix: Matrix<T>,
}

impl<T: Scalar> RepTensor<T> {
    pub fn get(&self, mu: usize, nu: usize) -> T {
        self.matrix[(mu, nu)]
    }

    /// `uᵀ t v`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        self.matrix.bilinear(u, v)
    }
}

/// Default steps: `1e-4` times the cloud's standard deviation per coordinate
/// (`1e-4` where a coordinate has no spread).
pub fn default_steps<T: Scalar>(cloud: &OpinionCloud<T>) -> Vec<T> {
    let cov = cloud.covariance();
    (0..cloud.dim())
        .map(|k| {
            let sd = cov[(k, k)].sqrt();
            T::lit(1e-4) * if sd > T::zero() { sd } else { T::one() }
        })
        .collect()
}

fn central_column<T: Scalar, E: MultiElection<T>>(
    election: &E,
    cloud: &OpinionCloud<T>,
    i: usize,
    nu: usize,
    h: T,
) -> Result<Vec<T>> {
    let mut up = cloud.points()[i].clone();
    let mut down = up.clone();
    up[nu] += h;
    down[nu] -= h;
    let y_up = election.outcome(&cloud.with_point(i, up)?)?;
    let y_down = election.outcome(&cloud.with_point(i, down)?)?;
    if y_up.len() != cloud.dim() || y_down.len() != cloud.dim() {
        return Err(Error::DimensionMismatch(
            "election outcome dimension differs from the opinion space".into(),
        ));
    }
    let col: Vec<T> = y_up
        .iter()
        .zip(&y_down)
        .map(|(&a, &b)| (a - b) / (h + h))
        .collect();
    if col.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("outcome derivative along axis {nu}")));
    }
    Ok(col)
}

/// Central-difference representation tensor of voter `i` with per-coordinate
/// steps `h`. With `richardson`, each column is `(4 D(h/2) − D(h)) / 3`.
pub fn rep_tensor<T: Scalar, E: MultiElection<T>>(
    election: &E,
    cloud: &OpinionCloud<T>,
    i: usize,
    h: &[T],
    richardson: bool,
) -> Result<RepTensor<T>> {
    let d = cloud.dim();
    if i >= cloud.len() {
        return Err(Error::OutOfRange {
            index: i,
            len: cloud.len(),
        });
    }
    if h.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} steps for dimension {d}",
            h.len()
        )));
    }
    if h.iter().any(|&s| !(s > T::zero() && s.is_finite())) {
        return Err(Error::InvalidParameter(
            "finite-difference steps must be positive".into(),
        ));
    }
    let mut m = Matrix::zeros(d);
    for nu in 0..d {
        let mut col = central_column(election, cloud, i, nu, h[nu])?;
        if richardson {
            let fine = central_column(election, cloud, i, nu, h[nu] * T::lit(0.5))?;
            let third = T::one() / T::lit(3.0);
            col = fine
                .iter()
                .zip(&col)
                .map(|(&f, &c)| (T::lit(4.0) * f - c) * third)
                .collect();
        }
        for mu in 0..d {
            m[(mu, nu)] = col[mu];
        }
    }
    Ok(RepTensor { matrix: m })
}

/// Directional representation along `ĉ = a ê + b ô`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionalRep<T> {
    /// `ĉᵀ t ĉ`.
    pub total: T,
    /// `a² êᵀtê + ab ôᵀtê`.
    pub on_axis: T,
    /// `b² ôᵀtô + ab êᵀtô`.
    pub off_axis: T,
    /// `ab (êᵀtô + ôᵀtê)`; zero when `ê` is an eigenvector of a symmetric `t`.
    pub cross: T,
    pub a: T,
    pub b: T,
}

fn frame_tolerance<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
}

/// Splits the representation along `ĉ` into on-axis and off-axis parts.
/// `ê` and `ô` must be orthonormal and `ĉ` a unit vector in their span.
pub fn directional_rep<T: Scalar>(t: &RepTensor<T>, c: &[T], e: &[T], o: &[T]) -> Result<DirectionalRep<T>> {
    let d = t.matrix.dim();
    if c.len() != d || e.len() != d || o.len() != d {
        return Err(Error::DimensionMismatch(
            "direction vectors must match the tensor".into(),
        ));
    }
    let tol = frame_tolerance::<T>();
    if (norm(e) - T::one()).abs() > tol || (norm(o) - T::one()).abs() > tol || dot(e, o).abs() > tol {
        return Err(Error::InvalidParameter("ê and ô must be orthonormal".into()));
    }
    let a = dot(c, e);
    let b = dot(c, o);
    let residual: Vec<T> = (0..d).map(|k| c[k] - a * e[k] - b * o[k]).collect();
    if norm(&residual) > tol || (a * a + b * b - T::one()).abs() > tol {
        return Err(Error::InvalidParameter(
            "ĉ must be a unit vector in the span of ê and ô".into(),
        ));
    }
    let tee = t.bilinear(e, e);
    let too = t.bilinear(o, o);
    let toe = t.bilinear(o, e);
    let teo = t.bilinear(e, o);
    Ok(DirectionalRep {
        total: t.bilinear(c, c),
        on_axis: a * a * tee + a * b * toe,
        off_axis: b * b * too + a * b * teo,
        cross: a * b * (teo + toe),
        a,
        b,
    })
}

/// Unit vector orthogonal to `e`: Gram–Schmidt on the first standard basis
/// vector whose residual keeps at least half its squared length.
pub fn orthogonal_completion<T: Scalar>(e: &[T]) -> Result<Vec<T>> {
    if e.len() < 2 {
        return Err(Error::InvalidParameter(
            "an orthogonal direction needs dimension at least 2".into(),
        ));
    }
    let e = normalize(e).ok_or_else(|| Error::Degenerate("zero election axis".into()))?;
    let half = T::lit(0.5) - T::epsilon() * T::lit(16.0);
    for k in 0..e.len() {
        let r: Vec<T> = (0..e.len())
            .map(|j| if j == k { T::one() } else { T::zero() } - e[k] * e[j])
            .collect();
        if dot(&r, &r) >= half {
            return normalize(&r).ok_or_else(|| Error::Degenerate("orthogonal completion".into()));
        }
    }
    unreachable!("some coordinate of a unit vector has square at most 1/d <= 1/2")
}

/// [`directional_rep`] with `ô` derived from `ĉ`: the normalized part of `ĉ`
/// orthogonal to `ê`, or [`orthogonal_completion`] when `ĉ ∥ ê`.
pub fn directional_rep_auto<T: Scalar>(t: &RepTensor<T>, c: &[T], e: &[T]) -> Result<DirectionalRep<T>> {
    let c = normalize(c).ok_or_else(|| Error::InvalidParameter("zero direction ĉ".into()))?;
    let e = normalize(e).ok_or_else(|| Error::InvalidParameter("zero election axis".into()))?;
    let a = dot(&c, &e);
    let rest: Vec<T> = c.iter().zip(&e).map(|(&x, &y)| x - a * y).collect();
    let o = if norm(&rest) > frame_tolerance::<T>() {
        normalize(&rest).expect("nonzero")
    } else {
        orthogonal_completion(&e)?
    };
    directional_rep(t, &c, &e, &o)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud() -> OpinionCloud<f64> {
        OpinionCloud::uniform(vec![
            vec![0.0, 1.0],
            vec![2.0, -1.0],
            vec![-1.5, 0.3],
            vec![0.7, 2.2],
        ])
        .unwrap()
    }

    #[test]
    fn mean_election_is_scaled_identity() {
        let c = cloud();
        let t = rep_tensor(&MeanElection, &c, 1, &default_steps(&c), false).unwrap();
        for mu in 0..2 {
            for nu in 0..2 {
                let want = if mu == nu { 0.25 } else { 0.0 };
                assert!((t.get(mu, nu) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn median_non_pivotal_voter_has_zero_tensor() {
        let c: OpinionCloud<f64> = OpinionCloud::uniform(vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![10.0, 10.0],
            vec![11.0, 11.0],
        ])
        .unwrap();
        let t = rep_tensor(&CoordinateMedianElection, &c, 4, &[1e-4, 1e-4], false).unwrap();
        assert!(t.matrix.rows().iter().flatten().all(|&x| x == 0.0));
        let pivotal = rep_tensor(&CoordinateMedianElection, &c, 2, &[1e-4, 1e-4], false).unwrap();
        assert!((pivotal.get(0, 0) - 1.0).abs() < 1e-9);
        assert!(pivotal.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn argument_checks() {
        let c = cloud();
        assert!(rep_tensor(&MeanElection, &c, 9, &[1e-4, 1e-4], false).is_err());
        assert!(rep_tensor(&MeanElection, &c, 0, &[1e-4], false).is_err());
        assert!(rep_tensor(&MeanElection, &c, 0, &[0.0, 1e-4], false).is_err());
        let nan = |_: &OpinionCloud<f64>| Ok(vec![f64::NAN, 0.0]);
        assert!(matches!(
            rep_tensor(&nan, &c, 0, &[1e-4, 1e-4], false),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn directional_breakdown_basics() {
        let t = RepTensor {
            matrix: Matrix::diag(&[2.0f64, 0.0]),
        };
        let r = directional_rep(&t, &[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!((r.total, r.on_axis, r.off_axis), (2.0, 2.0, 0.0));
        assert!(directional_rep(&t, &[1.0, 0.0], &[1.0, 0.0], &[0.6, 0.8]).is_err());
        assert!(directional_rep(&t, &[2.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn auto_frame_handles_parallel_directions() {
        let t = RepTensor {
            matrix: Matrix::from_rows(vec![vec![1.0f64, 0.5], vec![-0.2, 3.0]]).unwrap(),
        };
        let r = directional_rep_auto(&t, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(r.b, 0.0);
        assert_eq!(r.total, 1.0);
        let s = directional_rep_auto(&t, &[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((s.on_axis + s.off_axis - s.total).abs() < 1e-15);
    }

    #[test]
    fn completion_is_orthonormal() {
        for e in [vec![1.0f64, 0.0, 0.0], vec![0.6, 0.8, 0.0], vec![1.0, 1.0, 1.0]] {
            let o: Vec<f64> = orthogonal_completion(&e).unwrap();
            assert!(dot(&o, &e).abs() < 1e-15);
            assert!((norm(&o) - 1.0).abs() < 1e-15);
        }
        assert!(orthogonal_completion(&[1.0f64]).is_err());
    }
}
