//! Floating-point scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Returns `a / |a|`, or `None` when the norm vanishes.
pub(crate) fn normalize<T: Scalar>(a: &[T]) -> Option<Vec<T>> {
    let n = norm(a);
    if n <= T::zero() || !n.is_finite() {
        return None;
    }
    Some(a.iter().map(|&x| x / n).collect())
}

/// Angle between two vectors in `[0, π]`, as `2 atan2(|â − b̂|, |â + b̂|)`,
/// which stays accurate near 0 and π where `acos` does not.
pub(crate) fn angle_between<T: Scalar>(a: &[T], b: &[T]) -> T {
    let (na, nb) = (norm(a), norm(b));
    let (mut diff, mut sum) = (T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    T::lit(2.0) * diff.sqrt().atan2(sum.sqrt())
}

/// Flips the sign so the first component with magnitude above `tol` is positive.
pub(crate) fn canonical_sign<T: Scalar>(v: &mut [T], tol: T) {
    if let Some(&first) = v.iter().find(|x| x.abs() > tol) {
        if first < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}
