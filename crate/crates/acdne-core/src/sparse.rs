//! Minimal row-major sparse matrix used for node attributes and
//! aggregated neighbor features.
//!
//! Attribute matrices are mostly zeros (bag-of-words style), so storing
//! them densely would dominate memory on realistic inputs. Training only
//! ever needs small dense row slices, which [`SparseRowMatrix::gather_dense`]
//! materializes per mini-batch.

use ndarray::Array2;

use crate::error::{CoreError, Result};

/// Sparse matrix stored as one sorted `(column, value)` list per row.
///
/// Invariants: column indices are strictly increasing within a row and
/// below `ncols`; stored values are finite and nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRowMatrix {
    ncols: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl SparseRowMatrix {
    /// An all-zero matrix of the given shape.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseRowMatrix {
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    /// Builds from per-row entry lists, validating the invariants.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<u32> = None;
            for &(j, v) in row {
                if (j as usize) >= ncols {
                    return Err(CoreError::Validation(format!(
                        "sparse row {i}: column {j} out of range (ncols = {ncols})"
                    )));
                }
                if prev.is_some() && Some(j) <= prev {
                    return Err(CoreError::Validation(format!(
                        "sparse row {i}: columns not strictly increasing at {j}"
                    )));
                }
                if !v.is_finite() || v == 0.0 {
                    return Err(CoreError::Validation(format!(
                        "sparse row {i}, column {j}: value {v} is zero or not finite"
                    )));
                }
                prev = Some(j);
            }
        }
        Ok(SparseRowMatrix { ncols, rows })
    }

    /// Builds from a dense matrix, dropping exact zeros.
    pub fn from_dense(dense: &Array2<f64>) -> Result<Self> {
        let ncols = dense.ncols();
        let mut rows = Vec::with_capacity(dense.nrows());
        for r in dense.rows() {
            let mut row = Vec::new();
            for (j, &v) in r.iter().enumerate() {
                if !v.is_finite() {
                    return Err(CoreError::Validation(format!(
                        "dense value at column {j} is not finite"
                    )));
                }
                if v != 0.0 {
                    row.push((j as u32, v));
                }
            }
            rows.push(row);
        }
        Ok(SparseRowMatrix { ncols, rows })
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Count of stored (nonzero) entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// The sorted entry list of one row.
    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[(u32, f64)]> {
        self.rows.iter().map(Vec::as_slice)
    }

    /// True when every stored value is exactly 1.
    pub fn is_binary(&self) -> bool {
        self.rows
            .iter()
            .all(|row| row.iter().all(|&(_, v)| v == 1.0))
    }

    /// Densifies the selected rows, in order, into a `len(indices) x ncols`
    /// matrix. Indices may repeat.
    pub fn gather_dense(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.ncols));
        for (r, &i) in indices.iter().enumerate() {
            for &(j, v) in &self.rows[i] {
                out[[r, j as usize]] = v;
            }
        }
        out
    }

    /// Densifies the whole matrix.
    pub fn to_dense(&self) -> Array2<f64> {
        let all: Vec<usize> = (0..self.nrows()).collect();
        self.gather_dense(&all)
    }
}
