//! Compressed sparse row matrices for adjacency-sized operands.
//!
//! Only the products the alignment pipeline needs are implemented. All
//! accumulations run in a fixed row-major order, so results are reproducible
//! bit for bit on the same inputs.

use ndarray::{Array1, Array2, ArrayView2};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from (row, col, value) triplets. Triplets are
    /// sorted by (row, col) and duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.vals[lo..hi])
    }

    /// Iterates over all stored entries as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    /// Dense product `self * rhs`.
    pub fn matmul_dense(&self, rhs: &ArrayView2<f64>) -> Array2<f64> {
        assert_eq!(self.ncols, rhs.nrows(), "shape mismatch in csr matmul");
        let mut out = Array2::zeros((self.nrows, rhs.ncols()));
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut out_row = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out_row.scaled_add(v, &rhs.row(j));
            }
        }
        out
    }

    pub fn matvec(&self, x: &Array1<f64>) -> Array1<f64> {
        assert_eq!(self.ncols, x.len(), "shape mismatch in csr matvec");
        let mut out = Array1::zeros(self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for (i, j, v) in self.iter() {
            out[[i, j]] += v;
        }
        out
    }

    /// Returns a copy with entry (i, j) scaled by `w[i] * w[j]`.
    pub fn scale_sym(&self, w: &Array1<f64>) -> CsrMatrix {
        assert_eq!(self.nrows, self.ncols, "scale_sym needs a square matrix");
        assert_eq!(w.len(), self.nrows, "weight length mismatch");
        let mut out = self.clone();
        for i in 0..self.nrows {
            let lo = out.row_ptr[i];
            let hi = out.row_ptr[i + 1];
            for k in lo..hi {
                out.vals[k] *= w[i] * w[out.col_idx[k]];
            }
        }
        out
    }

    /// Frobenius inner product with a dense matrix of the same shape.
    pub fn frob_inner_dense(&self, other: &ArrayView2<f64>) -> f64 {
        assert_eq!((self.nrows, self.ncols), other.dim(), "shape mismatch");
        let mut acc = 0.0;
        for (i, j, v) in self.iter() {
            acc += v * other[[i, j]];
        }
        acc
    }

    /// Frobenius inner product with another CSR matrix of the same shape.
    pub fn frob_inner_csr(&self, other: &CsrMatrix) -> f64 {
        assert_eq!(
            (self.nrows, self.ncols),
            (other.nrows, other.ncols),
            "shape mismatch"
        );
        let mut acc = 0.0;
        for i in 0..self.nrows {
            let (ca, va) = self.row(i);
            let (cb, vb) = other.row(i);
            let (mut a, mut b) = (0, 0);
            while a < ca.len() && b < cb.len() {
                match ca[a].cmp(&cb[b]) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        acc += va[a] * vb[b];
                        a += 1;
                        b += 1;
                    }
                }
            }
        }
        acc
    }
}
