//! Assembly of the 3D anisotropic model problem
//! −a·u_xx − b·u_yy − c·u_zz = f on a regular grid with homogeneous
//! Dirichlet boundaries (boundary unknowns eliminated, unit mesh width).

use super::CsrMatrix;
use crate::error::{Error, Result};
use crate::rng;
use serde::{Deserialize, Serialize};

/// Right-hand-side selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RhsKind {
    Zero,
    Ones,
    Random { seed: u64 },
}

/// Grid extents and anisotropy coefficients for the model problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rhs_kind: RhsKind,
}

impl ProblemSpec {
    pub fn new(nx: usize, ny: usize, nz: usize, a: f64, b: f64, c: f64) -> Self {
        Self {
            nx,
            ny,
            nz,
            a,
            b,
            c,
            rhs_kind: RhsKind::Zero,
        }
    }

    /// Cubic grid with the anisotropy of the reference experiments
    /// (weak coupling in x).
    pub fn anisotropic_cube(n: usize, a: f64) -> Self {
        Self::new(n, n, n, a, 1.0, 1.0)
    }

    pub fn with_rhs(mut self, rhs: RhsKind) -> Self {
        self.rhs_kind = rhs;
        self
    }

    pub fn unknowns(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nz == 0 {
            return Err(Error::InvalidSpec(format!(
                "grid extents must be positive, got {}x{}x{}",
                self.nx, self.ny, self.nz
            )));
        }
        if !(self.a > 0.0 && self.b > 0.0 && self.c > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "anisotropy coefficients must be positive, got a={}, b={}, c={}",
                self.a, self.b, self.c
            )));
        }
        Ok(())
    }
}

/// Assemble the 7-point stencil for `spec`. x is the fastest-varying index.
pub fn assemble_anisotropic_7pt(spec: &ProblemSpec) -> Result<CsrMatrix> {
    spec.validate()?;
    let (nx, ny, nz) = (spec.nx, spec.ny, spec.nz);
    let (a, b, c) = (spec.a, spec.b, spec.c);
    let n = nx * ny * nz;
    let diag = 2.0 * a + 2.0 * b + 2.0 * c;
    let idx = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);

    let mut row_offsets = Vec::with_capacity(n + 1);
    row_offsets.push(0usize);
    let mut col_indices = Vec::with_capacity(7 * n);
    let mut values = Vec::with_capacity(7 * n);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                // columns in ascending order: -z, -y, -x, diag, +x, +y, +z
                if k > 0 {
                    col_indices.push(idx(i, j, k - 1));
                    values.push(-c);
                }
                if j > 0 {
                    col_indices.push(idx(i, j - 1, k));
                    values.push(-b);
                }
                if i > 0 {
                    col_indices.push(idx(i - 1, j, k));
                    values.push(-a);
                }
                col_indices.push(idx(i, j, k));
                values.push(diag);
                if i + 1 < nx {
                    col_indices.push(idx(i + 1, j, k));
                    values.push(-a);
                }
                if j + 1 < ny {
                    col_indices.push(idx(i, j + 1, k));
                    values.push(-b);
                }
                if k + 1 < nz {
                    col_indices.push(idx(i, j, k + 1));
                    values.push(-c);
                }
                row_offsets.push(col_indices.len());
            }
        }
    }
    CsrMatrix::from_parts(n, n, row_offsets, col_indices, values)
}

/// Materialize the right-hand side for `spec`. Random vectors are
/// normalized to unit 2-norm.
pub fn build_rhs(spec: &ProblemSpec) -> Vec<f64> {
    let n = spec.unknowns();
    match spec.rhs_kind {
        RhsKind::Zero => vec![0.0; n],
        RhsKind::Ones => vec![1.0; n],
        RhsKind::Random { seed } => random_unit_vector(n, seed),
    }
}

/// Deterministic random vector with unit 2-norm.
pub fn random_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| rng::hash_unit(seed, i) - 0.5).collect();
    let norm = super::norm2(&v);
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm2;

    #[test]
    fn single_cell_is_full_stencil_diagonal() {
        let a = assemble_anisotropic_7pt(&ProblemSpec::new(1, 1, 1, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(a.nrows(), 1);
        assert_eq!(a.get(0, 0), 6.0);
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn center_row_of_3cube_matches_stencil() {
        let spec = ProblemSpec::new(3, 3, 3, 0.001, 1.0, 1.0);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        let center = 1 + 3 * (1 + 3 * 1);
        let (cols, vals) = a.row(center);
        assert_eq!(cols.len(), 7);
        let diag = a.get(center, center);
        assert!((diag - 4.002).abs() < 1e-15);
        let mut offdiag: Vec<f64> = cols
            .iter()
            .zip(vals)
            .filter(|(c, _)| **c != center)
            .map(|(_, v)| *v)
            .collect();
        offdiag.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(offdiag, vec![-1.0, -1.0, -1.0, -1.0, -0.001, -0.001]);
    }

    #[test]
    fn interior_rows_conserve_constants() {
        let spec = ProblemSpec::new(4, 4, 4, 0.3, 1.7, 0.9);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        for i in 0..a.nrows() {
            let (cols, vals) = a.row(i);
            if cols.len() == 7 {
                let sum: f64 = vals.iter().sum();
                assert!(sum.abs() < 1e-12, "row {i} sum {sum}");
            }
        }
    }

    #[test]
    fn assembly_is_symmetric() {
        let spec = ProblemSpec::new(3, 4, 2, 0.01, 1.0, 2.5);
        let a = assemble_anisotropic_7pt(&spec).unwrap();
        assert_eq!(a.transpose(), a);
    }

    #[test]
    fn zero_extent_rejected() {
        let spec = ProblemSpec::new(0, 2, 2, 1.0, 1.0, 1.0);
        assert!(assemble_anisotropic_7pt(&spec).is_err());
    }

    #[test]
    fn random_rhs_has_unit_norm() {
        let v = random_unit_vector(100, 42);
        assert!((norm2(&v) - 1.0).abs() < 1e-12);
        let w = random_unit_vector(100, 42);
        assert_eq!(v, w);
    }
}
