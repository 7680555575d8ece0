//! Minimal dense linear algebra over [`Real`]: row-major matrices and a
//! Cholesky factorization with jitter escalation.

use std::ops::{Index, IndexMut};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> T {
        self.diag().into_iter().sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o = *o + a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols {
            return Err(Error::contract(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::contract("matrix shapes differ"));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    /// Replaces `A` by `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let m = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Relative jitter schedule: `initial·trace/n`, escalated ×10 up to `max·trace/n`.
#[derive(Debug, Clone, Copy)]
pub struct JitterPolicy {
    pub initial: f64,
    pub max: f64,
    /// Try an unjittered factorization before the schedule.
    pub exact_first: bool,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        Self {
            initial: 1e-10,
            max: 1e-6,
            exact_first: false,
        }
    }
}

impl JitterPolicy {
    /// For matrices that are positive definite in exact arithmetic.
    pub fn exact_first() -> Self {
        Self {
            exact_first: true,
            ..Self::default()
        }
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A + εI`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
    jitter: T,
}

impl<T: Real> Cholesky<T> {
    /// Factors a symmetric positive (semi)definite matrix, adding diagonal
    /// jitter per `policy`. The all-zero matrix factors to `L = 0`.
    pub fn new(a: &Matrix<T>, policy: JitterPolicy) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::contract("Cholesky needs a square matrix"));
        }
        let n = a.rows();
        if a.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(Error::Factorization {
                what: "matrix has non-finite entries",
                size: n,
                jitter: 0.0,
            });
        }
        if a.max_abs() == T::zero() {
            return Ok(Self {
                lower: Matrix::zeros(n, n),
                jitter: T::zero(),
            });
        }
        let scale = (a.trace() / T::from_count(n.max(1) as u64)).abs();
        let scale = if scale > T::zero() { scale } else { a.max_abs() };
        if policy.exact_first {
            if let Some(lower) = try_factor(a, T::zero()) {
                return Ok(Self {
                    lower,
                    jitter: T::zero(),
                });
            }
        }
        if !(policy.initial > 0.0) {
            return Err(Error::Factorization {
                what: "matrix is not positive definite and jitter is disabled",
                size: n,
                jitter: 0.0,
            });
        }
        let mut rel = policy.initial;
        loop {
            let eps = T::lit(rel) * scale;
            if let Some(lower) = try_factor(a, eps) {
                return Ok(Self { lower, jitter: eps });
            }
            rel *= 10.0;
            if rel > policy.max * (1.0 + 1e-9) {
                return Err(Error::Factorization {
                    what: "Cholesky factorization failed after jitter escalation",
                    size: n,
                    jitter: (T::lit(rel / 10.0) * scale).to_f64_lossy(),
                });
            }
        }
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[T]) -> Vec<T> {
        let n = self.dim();
        (0..n).map(|i| dot(&self.lower.row(i)[..=i], &z[..=i])).collect()
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::contract("right-hand side length mismatch"));
        }
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let s = dot(&l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        Ok(y)
    }

    /// Solves `(L Lᵀ) X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        if b.rows() != self.dim() {
            return Err(Error::contract("right-hand side row count mismatch"));
        }
        let mut out = Matrix::zeros(b.rows(), b.cols());
        let mut col = vec![T::zero(); b.rows()];
        for j in 0..b.cols() {
            for i in 0..b.rows() {
                col[i] = b[(i, j)];
            }
            let x = self.solve(&col)?;
            for i in 0..b.rows() {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }
}

fn try_factor<T: Real>(a: &Matrix<T>, eps: T) -> Option<Matrix<T>> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let s = dot(&l.row(j)[..j], &l.row(j)[..j]);
        let d = a[(j, j)] + eps - s;
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
            let half_sum = (a[(i, j)] + a[(j, i)]) * T::lit(0.5);
            l[(i, j)] = (half_sum - s) / d;
        }
    }
    Some(l)
}
