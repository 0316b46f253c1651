use super::exec::Exec;
use super::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row form, used as a fixed propagation
/// operator (normalized adjacency or mean aggregator).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn new(n: usize, offsets: Vec<usize>, cols: Vec<usize>, vals: Vec<T>) -> Result<Self> {
        if offsets.len() != n + 1 || offsets[n] != cols.len() || cols.len() != vals.len() {
            return Err(Error::shape(
                "sparse",
                format!(
                    "n={n}, offsets={}, cols={}, vals={}",
                    offsets.len(),
                    cols.len(),
                    vals.len()
                ),
            ));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= n) {
            return Err(Error::Range {
                what: "column",
                index: c,
                limit: n,
            });
        }
        Ok(Self {
            n,
            offsets,
            cols,
            vals,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
        self.cols[lo..hi]
            .iter()
            .copied()
            .zip(self.vals[lo..hi].iter().copied())
    }

    pub fn to_dense(&self) -> Matrix<T> {
        let mut m = Matrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m.set(i, j, m.get(i, j) + v);
            }
        }
        m
    }

    /// y = S x.
    pub(crate) fn mul_dense(&self, x: &Matrix<T>, exec: &Exec) -> Matrix<T> {
        let d = x.cols();
        let mut out = Matrix::zeros(self.n, d);
        if out.is_empty() {
            return out;
        }
        exec.for_row_chunks(out.as_mut_slice(), d, |r0, chunk| {
            for (local, orow) in chunk.chunks_mut(d).enumerate() {
                for (j, v) in self.row(r0 + local) {
                    for (o, &xv) in orow.iter_mut().zip(x.row(j)) {
                        *o += v * xv;
                    }
                }
            }
        });
        out
    }

    /// y = Sᵀ g, accumulated by scattering rows of `g`.
    pub(crate) fn mul_dense_transposed(&self, g: &Matrix<T>) -> Matrix<T> {
        let d = g.cols();
        let mut out = Matrix::zeros(self.n, d);
        for i in 0..self.n {
            let grow = g.row(i);
            for (j, v) in self.row(i) {
                for (o, &gv) in out.row_mut(j).iter_mut().zip(grow) {
                    *o += v * gv;
                }
            }
        }
        out
    }
}
