//! Dense vectors and matrices over a [`Scalar`], and the two linear solvers.

use std::ops::{Index, IndexMut};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

/// A vector with one entry per variable of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct NumVec<T>(pub Vec<T>);

impl<T: Scalar> NumVec<T> {
    pub fn zeros(n: usize) -> Self {
        NumVec(vec![T::zero(); n])
    }

    pub fn ones(n: usize) -> Self {
        NumVec(vec![T::one(); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Componentwise strict `self < other`.
    pub fn lt(&self, other: &Self) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a < b)
    }

    /// Every component strictly positive.
    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|a| *a > T::zero())
    }

    pub fn add(&self, other: &Self) -> Self {
        NumVec(self.0.iter().zip(&other.0).map(|(a, b)| a.clone() + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        NumVec(self.0.iter().zip(&other.0).map(|(a, b)| a.clone() - b).collect())
    }

    pub fn scale(&self, s: &T) -> Self {
        NumVec(self.0.iter().map(|a| a.clone() * s).collect())
    }

    pub fn min_entry(&self) -> Option<T> {
        self.0.iter().cloned().reduce(|a, b| if b < a { b } else { a })
    }

    pub fn max_entry(&self) -> Option<T> {
        self.0.iter().cloned().reduce(|a, b| if b > a { b } else { a })
    }

    /// Max-norm as a float, for reporting.
    pub fn max_norm_f64(&self) -> f64 {
        self.0.iter().map(|a| a.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(Scalar::to_f64).collect()
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if self.0.len() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                got: self.0.len(),
            })
        }
    }
}

impl<T> Index<usize> for NumVec<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for NumVec<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

/// Dense row-major n x n matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMat<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMat<T> {
    pub fn zeros(n: usize) -> Self {
        SquareMat {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        SquareMat {
            n,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, v: &NumVec<T>) -> NumVec<T> {
        NumVec(
            (0..self.n)
                .map(|i| {
                    self.row(i)
                        .iter()
                        .zip(v.iter())
                        .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b)
                })
                .collect(),
        )
    }

    /// `Id - self`.
    pub fn identity_minus(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            for k in 0..self.n {
                let v = m[(i, k)].clone();
                m[(i, k)] = if i == k { T::one() - v } else { -v };
            }
        }
        m
    }
}

impl<T> Index<(usize, usize)> for SquareMat<T> {
    type Output = T;
    fn index(&self, (i, k): (usize, usize)) -> &T {
        &self.data[i * self.n + k]
    }
}

impl<T> IndexMut<(usize, usize)> for SquareMat<T> {
    fn index_mut(&mut self, (i, k): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + k]
    }
}

/// Solve `a * y = b` in the mode of `T`.
pub fn solve_linear<T: Scalar>(
    a: &SquareMat<T>,
    b: &NumVec<T>,
    arith: &crate::scalar::Arith,
) -> Result<NumVec<T>> {
    b.check_dim(a.dim())?;
    T::solve_linear(a, b, arith)
}

/// Fraction-free (Bareiss) elimination on the integer-scaled augmented matrix,
/// followed by exact back-substitution.
pub(crate) fn solve_exact(a: &SquareMat<Rational>, b: &NumVec<Rational>) -> Result<NumVec<Rational>> {
    let n = a.dim();
    b.check_dim(n)?;
    // Clear denominators row by row; scaling a row does not change the solution.
    let mut m: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            let row: Vec<&Rational> = a.row(i).iter().chain(std::iter::once(&b[i])).collect();
            let lcm = row.iter().fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
            row.iter().map(|r| r.numer() * (&lcm / r.denom())).collect()
        })
        .collect();

    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot_row = (k..n).find(|&r| !m[r][k].is_zero()).ok_or(Error::SingularMatrix { column: k })?;
        m.swap(k, pivot_row);
        for i in k + 1..n {
            for j in k + 1..=n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
            m[i][k] = BigInt::zero();
        }
        prev = m[k][k].clone();
    }

    // With D the last pivot (the determinant up to sign), D * y is integral
    // and every division below is exact.
    let det = m[n - 1][n - 1].clone();
    let mut scaled = vec![BigInt::zero(); n];
    for i in (0..n).rev() {
        let mut acc = &det * &m[i][n];
        for j in i + 1..n {
            acc -= &m[i][j] * &scaled[j];
        }
        scaled[i] = acc / &m[i][i];
    }
    Ok(NumVec(scaled.into_iter().map(|v| Rational::new(v, det.clone())).collect()))
}

/// LU with partial pivoting.
pub(crate) fn solve_float(a: &SquareMat<f64>, b: &NumVec<f64>, tol: f64) -> Result<NumVec<f64>> {
    let n = a.dim();
    b.check_dim(n)?;
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| a.row(i).iter().copied().chain(std::iter::once(b[i])).collect())
        .collect();
    for k in 0..n {
        let (p, mag) = (k..n)
            .map(|r| (r, m[r][k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag.is_nan() || mag < tol {
            return Err(Error::SingularMatrix { column: k });
        }
        m.swap(k, p);
        for i in k + 1..n {
            let factor = m[i][k] / m[k][k];
            if factor != 0.0 {
                let (top, bottom) = m.split_at_mut(i);
                for (v, p) in bottom[0][k..].iter_mut().zip(&top[k][k..]) {
                    *v -= factor * p;
                }
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = m[i][n];
        for j in i + 1..n {
            acc -= m[i][j] * y[j];
        }
        y[i] = acc / m[i][i];
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(NumVec(y))
}

/// Sign-aware helper for tests and diagnostics.
pub fn is_nonnegative<T: Scalar>(v: &NumVec<T>) -> bool {
    v.iter().all(|x| *x >= T::zero())
}
