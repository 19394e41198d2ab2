//! Dense error-propagation matrix of a cycle program and its spectral
//! radius — the independent route for checking measured convergence
//! factors at desk scale.

use super::{apply_program, EvalContext};
use crate::cycle::CycleProgram;
use crate::error::{Error, Result};
use crate::setup::AmgHierarchy;
use crate::sparse::{norm2, DenseMatrix};

/// Column j of the returned matrix is one program pass applied to the
/// unit error e_j with a zero right-hand side. Guarded to fine-level
/// dimensions of at most 200.
pub fn error_propagation_dense(
    hierarchy: &AmgHierarchy,
    program: &CycleProgram,
) -> Result<DenseMatrix> {
    let n = hierarchy.fine_matrix().nrows();
    if n > 200 {
        return Err(Error::Numerical(format!(
            "error propagation matrix guarded to n <= 200, got {n}"
        )));
    }
    let mut ctx = EvalContext::new(hierarchy);
    let zero_rhs = vec![0.0; n];
    let mut e = DenseMatrix::zeros(n, n);
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        apply_program(hierarchy, program, &mut ctx, &zero_rhs, &mut col)?;
        for i in 0..n {
            e[(i, j)] = col[i];
        }
    }
    Ok(e)
}

/// |dominant eigenvalue| via normalized power iteration. The estimate is
/// the geometric mean of the trailing growth factors, which stays stable
/// for complex-conjugate dominant pairs.
pub fn spectral_radius(e: &DenseMatrix, max_steps: usize, tol: f64) -> f64 {
    let n = e.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n)
        .map(|i| crate::rng::hash_unit(0x9d2c_5680, i) + 0.5)
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut factors: Vec<f64> = Vec::with_capacity(max_steps);
    for step in 0..max_steps {
        let w = e.matvec(&v);
        let growth = norm2(&w);
        if growth == 0.0 {
            return 0.0;
        }
        factors.push(growth);
        v = w;
        v.iter_mut().for_each(|x| *x /= growth);
        // a settled factor sequence means a real dominant eigenvalue
        if step >= 2 {
            let f = factors[step];
            if (f - factors[step - 1]).abs() <= tol && (f - factors[step - 2]).abs() <= tol {
                return f;
            }
        }
    }
    // oscillating growth (complex dominant pair): geometric mean of the
    // post-transient half
    let tail = (factors.len() / 2).max(1);
    let logsum: f64 = factors[factors.len() - tail..]
        .iter()
        .map(|f| f.ln())
        .sum();
    (logsum / tail as f64).exp()
}
