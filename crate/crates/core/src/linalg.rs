//! Small dense linear algebra: just what the Gaussian model needs.

use crate::scalar::Scalar;
use std::ops::{Index, IndexMut};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, T::one())
    }

    pub fn scaled_identity(n: usize, q: T) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = q;
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

    /// Builds a matrix from row vectors. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::of(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            if i == j {
                self[(i, i)]
            } else {
                (self[(i, j)] + self[(j, i)]) * half
            }
        })
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    /// `self + w * a bᵀ`, written entry by entry so that `a == b` keeps a
    /// symmetric matrix exactly symmetric.
    pub fn add_outer(&mut self, a: &[T], b: &[T], w: T) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for i in 0..self.rows {
            let ai = a[i];
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (dst, &bj) in row.iter_mut().zip(b) {
                *dst += w * (ai * bj);
            }
        }
    }

    /// In place `self = decay * self + w * d dᵀ`; exact symmetry is preserved.
    pub fn decay_add_outer(&mut self, decay: T, d: &[T], w: T) {
        debug_assert!(self.is_square() && d.len() == self.rows);
        for i in 0..self.rows {
            let di = d[i];
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (dst, &dj) in row.iter_mut().zip(d) {
                *dst = decay * *dst + w * (di * dj);
            }
        }
    }

    /// `self + step * (target - self)`, entrywise.
    pub fn relax_toward(&self, target: &Self, step: T) -> Self {
        assert_eq!((self.rows, self.cols), (target.rows, target.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&target.data)
                .map(|(&s, &t)| s + step * (t - s))
                .collect(),
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = self`, or `None` when a pivot
    /// is not strictly positive. Only the lower triangle is read.
    pub fn cholesky(&self) -> Option<Self> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(l)
    }

    /// Cyclic Jacobi eigendecomposition of a symmetric matrix.
    /// Returns eigenvalues and the matrix whose columns are the eigenvectors.
    pub fn symmetric_eigen(&self) -> (Vec<T>, Self) {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut v = Self::identity(n);
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            let scale = a.max_abs();
            if off.sqrt() <= eps * scale.max(T::min_positive_value()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::of(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        ((0..n).map(|i| a[(i, i)]).collect(), v)
    }

    /// Factor `F` with `F Fᵀ ≈ sym(self)` that never fails on finite input.
    ///
    /// Cholesky first; then diagonal jitter `1e-10 * trace / m` growing ×10
    /// up to three times; finally an eigendecomposition with negative
    /// eigenvalues clamped to zero.
    pub fn psd_factor(&self) -> PsdFactor<T> {
        let sym = self.symmetrized();
        if let Some(l) = sym.cholesky() {
            return PsdFactor {
                factor: l,
                method: FactorMethod::Cholesky,
            };
        }
        let n = self.rows;
        let base = if n == 0 {
            T::zero()
        } else {
            (sym.trace() / T::of_usize(n)).abs()
        };
        if base > T::zero() {
            let mut jitter = T::of(1e-10) * base;
            for attempt in 1..=3u8 {
                let mut jittered = sym.clone();
                for i in 0..n {
                    jittered[(i, i)] += jitter;
                }
                if let Some(l) = jittered.cholesky() {
                    return PsdFactor {
                        factor: l,
                        method: FactorMethod::Jitter(attempt),
                    };
                }
                jitter *= T::of(10.0);
            }
        }
        let (vals, vecs) = sym.symmetric_eigen();
        let roots: Vec<T> = vals.iter().map(|&v| v.max(T::zero()).sqrt()).collect();
        let factor = Self::from_fn(n, n, |i, j| vecs[(i, j)] * roots[j]);
        PsdFactor {
            factor,
            method: FactorMethod::ClampedEigen,
        }
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorMethod {
    Cholesky,
    /// Cholesky succeeded after the given number of jitter escalations.
    Jitter(u8),
    ClampedEigen,
}

#[derive(Debug, Clone)]
pub struct PsdFactor<T> {
    pub factor: Matrix<T>,
    pub method: FactorMethod,
}
