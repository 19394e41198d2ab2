//! Sparse (CSR) and small-dense linear algebra kernels.
//!
//! Matrices are immutable after construction and safe to share between
//! concurrent readers; every kernel is pure with respect to its inputs.

mod dense;
mod market;
mod problem;

pub use dense::{dense_lu_factor, dense_lu_solve, DenseFactor, DenseMatrix};
pub use market::{
    read_matrix_market, read_matrix_market_file, write_matrix_market, write_matrix_market_file,
};
pub use problem::{
    assemble_anisotropic_7pt, build_rhs, random_unit_vector, ProblemSpec, RhsKind,
};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from raw CSR arrays, checking the structural invariants:
    /// monotone offsets, strictly increasing in-row columns, indices in range.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != nrows + 1 {
            return Err(Error::InvalidCsr(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                nrows + 1
            )));
        }
        if row_offsets[0] != 0 || row_offsets[nrows] != col_indices.len() {
            return Err(Error::InvalidCsr(
                "row_offsets must start at 0 and end at nnz".into(),
            ));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidCsr(
                "col_indices and values differ in length".into(),
            ));
        }
        for i in 0..nrows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidCsr(format!("row {i}: decreasing offsets")));
            }
            for k in lo..hi {
                if col_indices[k] >= ncols {
                    return Err(Error::InvalidCsr(format!(
                        "row {i}: column {} out of range",
                        col_indices[k]
                    )));
                }
                if k > lo && col_indices[k] <= col_indices[k - 1] {
                    return Err(Error::InvalidCsr(format!(
                        "row {i}: columns not strictly increasing"
                    )));
                }
            }
        }
        Ok(Self {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; nrows + 1];
        let mut col_indices: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidCsr(format!("triplet ({r},{c}) out of range")));
            }
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_indices.push(c);
            values.push(v);
            row_counts[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..nrows {
            row_counts[i + 1] += row_counts[i];
        }
        Self::from_parts(nrows, ncols, row_counts, col_indices, values)
    }

    /// Identity matrix of size n.
    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    /// Entry (i, j), zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Diagonal entries; rows without a stored diagonal yield zero.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// y = A x into a preallocated buffer.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    /// y = A x.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch {
                op: "spmv",
                expected: self.ncols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// Exact structural transpose with sorted rows.
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let dst = counts[*c];
                col_indices[dst] = i;
                values[dst] = *v;
                counts[*c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Sparse product A·B (Gustavson). All computed positions are kept,
    /// including exact zeros from cancellation.
    pub fn spgemm(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                op: "spgemm",
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let n = self.nrows;
        let m = other.ncols;
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0usize);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut acc = vec![0.0f64; m];
        let mut marker = vec![usize::MAX; m];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..n {
            touched.clear();
            let (a_cols, a_vals) = self.row(i);
            for (k, av) in a_cols.iter().zip(a_vals) {
                let (b_cols, b_vals) = other.row(*k);
                for (j, bv) in b_cols.iter().zip(b_vals) {
                    if marker[*j] != i {
                        marker[*j] = i;
                        acc[*j] = 0.0;
                        touched.push(*j);
                    }
                    acc[*j] += av * bv;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_indices.push(j);
                values.push(acc[j]);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(CsrMatrix {
            nrows: n,
            ncols: m,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Dense copy, for small oracles and the coarse solver.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                d[(i, *c)] = *v;
            }
        }
        d
    }

    /// True if A equals its transpose entrywise within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let t = self.transpose();
        if t.row_offsets != self.row_offsets || t.col_indices != self.col_indices {
            // sparsity patterns disagree; compare through lookups
            for i in 0..self.nrows {
                let (cols, vals) = self.row(i);
                for (c, v) in cols.iter().zip(vals) {
                    if (v - t.get(i, *c)).abs() > tol {
                        return false;
                    }
                }
            }
            return true;
        }
        self.values
            .iter()
            .zip(&t.values)
            .all(|(a, b)| (a - b).abs() <= tol)
    }
}

/// r = f − A x into a preallocated buffer.
pub fn residual_into(a: &CsrMatrix, x: &[f64], f: &[f64], r: &mut [f64]) {
    a.spmv_into(x, r);
    for i in 0..r.len() {
        r[i] = f[i] - r[i];
    }
}

/// r = f − A x.
pub fn residual(a: &CsrMatrix, x: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "residual",
            expected: a.ncols(),
            found: x.len(),
        });
    }
    if f.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            op: "residual",
            expected: a.nrows(),
            found: f.len(),
        });
    }
    let mut r = vec![0.0; a.nrows()];
    residual_into(a, x, f, &mut r);
    Ok(r)
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// y += alpha * x.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for i in 0..y.len() {
        y[i] += alpha * x[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn spmv_identity() {
        let a = CsrMatrix::identity(3);
        let y = a.spmv(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn spmv_constant_near_nullspace() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)])
            .unwrap();
        let y = a.spmv(&[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![1.0, 1.0]);
    }

    #[test]
    fn spmv_dimension_mismatch() {
        let a = CsrMatrix::identity(3);
        assert!(a.spmv(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn residual_of_zero_guess_is_f() {
        let a = poisson1d(4);
        let f = vec![1.0, -2.0, 3.0, 0.5];
        let r = residual(&a, &[0.0; 4], &f).unwrap();
        assert_eq!(r, f);
    }

    #[test]
    fn norm2_of_zero_vector() {
        assert_eq!(norm2(&[0.0; 5]), 0.0);
    }

    #[test]
    fn transpose_identity() {
        let a = CsrMatrix::identity(4);
        assert_eq!(a.transpose(), a);
    }

    #[test]
    fn transpose_moves_single_entry() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 2, 5.0)]).unwrap();
        let t = a.transpose();
        assert_eq!(t.nrows(), 3);
        assert_eq!(t.ncols(), 2);
        assert_eq!(t.get(2, 0), 5.0);
        assert_eq!(t.nnz(), 1);
    }

    #[test]
    fn transpose_twice_is_identity_bitwise() {
        let mut t = Vec::new();
        for i in 0..10 {
            for j in 0..7 {
                if (i * 7 + j) % 3 == 0 {
                    t.push((i, j, (i as f64 + 0.37) * (j as f64 - 2.21)));
                }
            }
        }
        let a = CsrMatrix::from_triplets(10, 7, &t).unwrap();
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn spgemm_identity_left_right() {
        let a = poisson1d(5);
        let i5 = CsrMatrix::identity(5);
        assert_eq!(a.spgemm(&i5).unwrap(), a);
        assert_eq!(i5.spgemm(&a).unwrap(), a);
    }

    #[test]
    fn spgemm_matches_dense_product() {
        let a = CsrMatrix::from_triplets(
            3,
            4,
            &[(0, 0, 1.0), (0, 3, 2.0), (1, 1, -1.5), (2, 0, 0.5), (2, 2, 3.0)],
        )
        .unwrap();
        let b = CsrMatrix::from_triplets(
            4,
            2,
            &[(0, 0, 2.0), (1, 1, 4.0), (2, 0, -1.0), (3, 1, 1.0)],
        )
        .unwrap();
        let c = a.spgemm(&b).unwrap();
        let (da, db) = (a.to_dense(), b.to_dense());
        let dc = da.matmul(&db);
        for i in 0..3 {
            for j in 0..2 {
                assert!((c.get(i, j) - dc[(i, j)]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn from_parts_rejects_unsorted_columns() {
        let r = CsrMatrix::from_parts(1, 3, vec![0, 2], vec![2, 0], vec![1.0, 1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, 2.5)]).unwrap();
        assert_eq!(a.get(0, 0), 3.5);
        assert_eq!(a.nnz(), 1);
    }
}
