//! Small dense matrices: the coarse-grid Gaussian elimination and the
//! brute-force oracles used by tests.

use crate::error::{Error, Result};
use std::ops::{Index, IndexMut};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows > 0 { rows[0].len() } else { 0 };
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), ncols);
            m.data[i * ncols..(i + 1) * ncols].copy_from_slice(r);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row_slice(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row_slice(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut out = DenseMatrix::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.ncols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// max_i Σ_j |a_ij|
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row_slice(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// LU factors with partial pivoting, stored packed (L below the unit
/// diagonal, U on and above it).
#[derive(Debug, Clone)]
pub struct DenseFactor {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

/// Factor a square matrix with partial pivoting.
pub fn dense_lu_factor(a: &DenseMatrix) -> Result<DenseFactor> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            op: "dense_lu_factor",
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let n = a.nrows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_val = lu[(k, k)].abs();
        for i in k + 1..n {
            let v = lu[(i, k)].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = i;
            }
        }
        if pivot_val == 0.0 {
            return Err(Error::SingularMatrix(k));
        }
        if pivot_row != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
            perm.swap(k, pivot_row);
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                lu[(i, j)] -= factor * ukj;
            }
        }
    }
    Ok(DenseFactor { lu, perm })
}

/// Solve A x = b using precomputed LU factors.
pub fn dense_lu_solve(f: &DenseFactor, b: &[f64]) -> Result<Vec<f64>> {
    let n = f.lu.nrows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            op: "dense_lu_solve",
            expected: n,
            found: b.len(),
        });
    }
    let mut x: Vec<f64> = f.perm.iter().map(|&p| b[p]).collect();
    // forward substitution with unit lower triangle
    for i in 0..n {
        let mut acc = x[i];
        for j in 0..i {
            acc -= f.lu[(i, j)] * x[j];
        }
        x[i] = acc;
    }
    // back substitution
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in i + 1..n {
            acc -= f.lu[(i, j)] * x[j];
        }
        x[i] = acc / f.lu[(i, i)];
    }
    Ok(x)
}

impl DenseFactor {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        dense_lu_solve(self, b)
    }

    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let sol = dense_lu_solve(self, b).expect("factor/rhs dimensions agree");
        x.copy_from_slice(&sol);
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    /// Reconstruct P·A − L·U, for the factorization residual check.
    pub fn reconstruction_error(&self, a: &DenseMatrix) -> f64 {
        let n = self.dim();
        let mut l = DenseMatrix::identity(n);
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if j < i {
                    l[(i, j)] = self.lu[(i, j)];
                } else {
                    u[(i, j)] = self.lu[(i, j)];
                }
            }
        }
        let lu = l.matmul(&u);
        let mut pa = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                pa[(i, j)] = a[(self.perm[i], j)];
            }
        }
        pa.max_abs_diff(&lu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm2;

    #[test]
    fn identity_solve_returns_rhs() {
        let f = dense_lu_factor(&DenseMatrix::identity(4)).unwrap();
        let b = vec![1.0, -2.0, 3.0, 4.0];
        assert_eq!(f.solve(&b).unwrap(), b);
    }

    #[test]
    fn hand_checkable_2x2() {
        let a = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let f = dense_lu_factor(&a).unwrap();
        let x = f.solve(&[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn spd_random_residual_small() {
        // deterministic pseudo-random SPD matrix: M = B Bᵀ + 20 I
        let n = 20;
        let mut b = DenseMatrix::zeros(n, n);
        let mut s = 1234567u64;
        for i in 0..n {
            for j in 0..n {
                s = crate::rng::splitmix64(s);
                b[(i, j)] = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            }
        }
        let mut a = b.matmul(&b.transpose());
        for i in 0..n {
            a[(i, i)] += 20.0;
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let f = dense_lu_factor(&a).unwrap();
        let x = f.solve(&rhs).unwrap();
        let ax = a.matvec(&x);
        let res: Vec<f64> = ax.iter().zip(&rhs).map(|(p, q)| p - q).collect();
        assert!(norm2(&res) <= 1e-10 * norm2(&rhs));
        assert!(f.reconstruction_error(&a) <= 1e-10 * a.norm_inf());
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        match dense_lu_factor(&a) {
            Err(crate::error::Error::SingularMatrix(k)) => assert_eq!(k, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }
}
