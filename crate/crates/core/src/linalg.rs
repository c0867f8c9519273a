//! Small dense square matrices and a cyclic Jacobi symmetric eigensolver.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

/// Dense square matrix stored as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matrix<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            rows: vec![vec![T::zero(); n]; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        (0..n).for_each(|i| m[(i, i)] = T::one());
        m
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len());
        values.iter().enumerate().for_each(|(i, &v)| m[(i, i)] = v);
        m
    }

    /// Builds a matrix from rows; every row must have the row count's length.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "matrix row of length {} in a {n}x{n} matrix",
                bad.len()
            )));
        }
        Ok(Matrix { rows })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|i| self[(i, i)]).sum()
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim();
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        self.rows.iter().map(|r| dot(r, v)).collect()
    }

    /// `uᵀ M v`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        dot(u, &self.mul_vec(v))
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.iter_mut().zip(b).for_each(|(x, &y)| *x += y);
        }
    }

    /// Adds `weight * u vᵀ`.
    pub fn add_outer(&mut self, weight: T, u: &[T], v: &[T]) {
        for (row, &ui) in self.rows.iter_mut().zip(u) {
            row.iter_mut().zip(v).for_each(|(x, &vj)| *x += weight * ui * vj);
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Matrix {
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&x| x * s).collect())
                .collect(),
        }
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.rows
            .iter()
            .zip(&other.rows)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x - y).abs()))
            .fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.max_abs_diff(&self.transpose()) <= tol
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    ///
    /// Eigenvalues are returned in descending order; `vectors[k]` is the unit
    /// eigenvector for `values[k]`. Iterates until the off-diagonal Frobenius
    /// norm falls below `tol` times the matrix norm.
    pub fn symmetric_eigen(&self, tol: T) -> Result<SymmetricEigen<T>> {
        let n = self.dim();
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let scale = self
            .rows
            .iter()
            .flatten()
            .map(|&x| x * x)
            .sum::<T>()
            .sqrt()
            .max(T::min_positive_value());
        let off = |a: &Matrix<T>| -> T {
            let mut s = T::zero();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += a[(i, j)] * a[(i, j)];
                    }
                }
            }
            s.sqrt()
        };
        let mut sweeps = 0;
        while off(&a) > tol * scale {
            sweeps += 1;
            if sweeps > 100 {
                return Err(Error::NoConvergence(
                    "Jacobi eigensolver exceeded 100 sweeps".into(),
                ));
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let two = T::lit(2.0);
                    let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
        Ok(SymmetricEigen {
            values: order.iter().map(|&i| a[(i, i)]).collect(),
            vectors: order
                .iter()
                .map(|&i| (0..n).map(|k| v[(k, i)]).collect())
                .collect(),
        })
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.rows[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.rows[i][j]
    }
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}
