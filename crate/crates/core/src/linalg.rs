//! Small dense linear algebra used by the gossip and objective modules.
//!
//! Problem sizes here are a handful of agents and a few dimensions, so
//! everything is row-major `Vec` storage with straightforward loops.

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Iteration cap for [`spectral_norm`].
pub const POWER_ITERATION_CAP: usize = 10_000;
/// Relative convergence tolerance for [`spectral_norm`] (clamped to the
/// scalar type's precision).
pub const POWER_ITERATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim(c, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn diagonal(values: &[T]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        check_dim(self.cols, rhs.rows)?;
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] = out.data[i * rhs.cols + j] + a * rhs.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim(self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `Aᵀ x` without materialising the transpose.
    pub fn matvec_transposed(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim(self.rows, x.len())?;
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + a * xi;
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> T {
        norm(&self.data)
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm_sq<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    norm_sq(a).sqrt()
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

/// `a + s·b`
pub fn axpy<T: Scalar>(a: &[T], s: T, b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + s * y).collect()
}

pub fn scale<T: Scalar>(s: T, a: &[T]) -> Vec<T> {
    a.iter().map(|&x| s * x).collect()
}

/// Largest singular value of `a`, by power iteration on `AᵀA`.
///
/// Starts from the normalised all-ones vector. When that vector is
/// (numerically) in the null space of `A`, which is always the case for the
/// deviation `W − 𝟙𝟙ᵀ/n` of a row-stochastic `W`, a fixed irrational-step
/// sequence is used instead.
pub fn spectral_norm<T: Scalar>(a: &Matrix<T>) -> T {
    let n = a.cols;
    let fro = a.frobenius_norm();
    if n == 0 || a.rows == 0 || fro.is_zero() {
        return T::zero();
    }
    let tol = T::lit(POWER_ITERATION_TOL).max(T::epsilon() * T::lit(4.0));
    // Rounding level for ‖Av‖² when v is in the null space.
    let null_level = (T::epsilon() * fro * T::lit(n as f64)).powi(2);

    let ones = vec![T::one() / T::lit(n as f64).sqrt(); n];
    let mut v = ones;
    let av = a.matvec(&v).expect("square shapes checked above");
    if norm_sq(&av) <= null_level {
        v = fallback_start(n);
    }

    let mut estimate = T::zero();
    for _ in 0..POWER_ITERATION_CAP {
        let av = a.matvec(&v).expect("shape");
        let next = norm_sq(&av);
        let w = a.matvec_transposed(&av).expect("shape");
        let wn = norm(&w);
        if wn.is_zero() {
            return next.sqrt();
        }
        v = scale(T::one() / wn, &w);
        let converged = (next - estimate).abs() <= tol * next;
        estimate = next;
        if converged {
            break;
        }
    }
    estimate.sqrt()
}

fn fallback_start<T: Scalar>(n: usize) -> Vec<T> {
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    let raw: Vec<T> = (0..n)
        .map(|j| T::lit(((j + 1) as f64 * GOLDEN).fract() - 0.5 + 1e-3 * j as f64))
        .collect();
    let nr = norm(&raw);
    scale(T::one() / nr, &raw)
}

/// Eigenvalues `(min, max)` of a symmetric 2×2 matrix `[[a, b], [b, c]]`.
pub fn symmetric_2x2_eigenvalues<T: Scalar>(a: T, b: T, c: T) -> (T, T) {
    let half = T::lit(0.5);
    let mean = half * (a + c);
    let radius = (half * (a - c)).hypot(b);
    (mean - radius, mean + radius)
}

/// Orthonormalises the columns of `m` (modified Gram–Schmidt).
///
/// Fails if the columns are numerically dependent.
pub fn orthonormal_columns<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    let (r, c) = (m.rows, m.cols);
    let mut cols: Vec<Vec<T>> = (0..c).map(|j| (0..r).map(|i| m.get(i, j)).collect()).collect();
    for j in 0..c {
        for k in 0..j {
            let proj = dot(&cols[k], &cols[j]);
            let qk = cols[k].clone();
            cols[j] = axpy(&cols[j], -proj, &qk);
        }
        let nj = norm(&cols[j]);
        if nj <= T::epsilon() * T::lit(1e3) {
            return Err(Error::Domain("columns are linearly dependent".into()));
        }
        cols[j] = scale(T::one() / nj, &cols[j]);
    }
    let mut q = Matrix::zeros(r, c);
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            q.set(i, j, v);
        }
    }
    Ok(q)
}
