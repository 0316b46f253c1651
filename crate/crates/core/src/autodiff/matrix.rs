use std::fmt;

use serde::{Deserialize, Serialize};

use super::exec::Exec;
use super::Scalar;
use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Matrix")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &self.data)
            .finish()
    }
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, T::zero())
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "matrix",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn scalar(v: T) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    /// The single value of a 1x1 matrix.
    pub fn item(&self) -> T {
        debug_assert_eq!(self.data.len(), 1);
        self.data[0]
    }

    pub fn cast<U: Scalar>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Rows selected by `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Sequential-order sum of all entries.
    pub fn sum(&self) -> T {
        let mut acc = T::zero();
        for &v in &self.data {
            acc += v;
        }
        acc
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("{:?} x {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(matmul_nn(self, other, &Exec::Sequential))
    }

    /// Rows rescaled to unit L2 norm; rows with norm below `eps` are divided by `eps`.
    pub fn l2_normalized_rows(&self, eps: T) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            let row = out.row_mut(r);
            let norm = row_norm(row).max(eps);
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub(crate) fn row_norm<T: Scalar>(row: &[T]) -> T {
    dot(row, row).sqrt()
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv += alpha * xv;
    }
}

fn matmul_rows<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, r0: usize, out: &mut [T]) {
    let n = b.cols;
    for (local, orow) in out.chunks_mut(n.max(1)).enumerate() {
        let arow = a.row(r0 + local);
        for (k, &av) in arow.iter().enumerate() {
            if av != T::zero() {
                axpy(av, b.row(k), orow);
            }
        }
    }
}

/// C = A B.
pub(crate) fn matmul_nn<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, exec: &Exec) -> Matrix<T> {
    let mut out = Matrix::zeros(a.rows, b.cols);
    if out.is_empty() {
        return out;
    }
    let n = b.cols;
    exec.for_row_chunks(&mut out.data, n, |r0, chunk| matmul_rows(a, b, r0, chunk));
    out
}

/// C = A Bᵀ.
pub(crate) fn matmul_nt<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, exec: &Exec) -> Matrix<T> {
    let mut out = Matrix::zeros(a.rows, b.rows);
    if out.is_empty() {
        return out;
    }
    let n = b.rows;
    exec.for_row_chunks(&mut out.data, n, |r0, chunk| {
        for (local, orow) in chunk.chunks_mut(n).enumerate() {
            let arow = a.row(r0 + local);
            for (j, o) in orow.iter_mut().enumerate() {
                *o = dot(arow, b.row(j));
            }
        }
    });
    out
}

/// C = Aᵀ B. In parallel mode the reduction over rows of A is split into
/// blocks whose partial sums are added afterwards, which changes rounding.
pub(crate) fn matmul_tn<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, exec: &Exec) -> Matrix<T> {
    let (m, n) = (a.cols, b.cols);
    let accumulate = |lo: usize, hi: usize| {
        let mut out = vec![T::zero(); m * n];
        for r in lo..hi {
            let arow = a.row(r);
            let brow = b.row(r);
            for (i, &av) in arow.iter().enumerate() {
                if av != T::zero() {
                    axpy(av, brow, &mut out[i * n..(i + 1) * n]);
                }
            }
        }
        out
    };
    let data = exec.reduce_ranges(a.rows, m * n, accumulate);
    Matrix { rows: m, cols: n, data }
}
