//! Classical solvers used as ground truth for the quantum pipeline.

use thiserror::Error;

use crate::qcore::{c, ensure_square, ComplexMatrix, ComplexVector, QcoreError, C64};

/// Pivots smaller than this are treated as exact zeros.
pub const SINGULAR_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReferenceError {
    #[error("matrix is singular (pivot {pivot:e} in column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error(
        "matrix is not positive definite (p^dagger A p = {curvature:e} at iteration {iteration})"
    )]
    NotPositiveDefinite { iteration: usize, curvature: f64 },
    #[error("conjugate gradient did not reach tolerance {tol:e} in {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

pub type Result<T> = std::result::Result<T, ReferenceError>;

fn check_dims(a: &ComplexMatrix, b: &ComplexVector) -> Result<usize> {
    let n = ensure_square(a)?;
    if b.len() != n {
        return Err(QcoreError::DimensionMismatch {
            expected: n,
            found: b.len(),
        }
        .into());
    }
    Ok(n)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn direct_solve(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    let n = check_dims(a, b)?;
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let (pivot_row, pivot) =
            (col..n)
                .map(|r| (r, m[(r, col)].norm()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pivot < SINGULAR_PIVOT {
            return Err(ReferenceError::SingularMatrix { column: col, pivot });
        }
        if pivot_row != col {
            m.swap_rows(pivot_row, col);
            x.swap_rows(pivot_row, col);
        }
        let p = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / p;
            if f == c(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let v = m[(col, k)];
                m[(r, k)] -= f * v;
            }
            let v = x[col];
            x[r] -= f * v;
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for k in (row + 1)..n {
            acc -= m[(row, k)] * x[k];
        }
        x[row] = acc / m[(row, row)];
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CGReport {
    pub solution: ComplexVector,
    pub iterations: usize,
    /// `||A x - b||` recomputed from the returned solution.
    pub residual: f64,
}

/// Conjugate gradient for Hermitian positive-definite `A`, starting at zero.
///
/// Runs until the recursive residual drops below `tol`; gives up after
/// `2N + 10` iterations. The reported residual is recomputed from the final
/// iterate rather than taken from the recursion.
pub fn conjugate_gradient(a: &ComplexMatrix, b: &ComplexVector, tol: f64) -> Result<CGReport> {
    let n = check_dims(a, b)?;
    let max_iter = 2 * n + 10;
    let mut x = ComplexVector::zeros(n);
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    let mut iterations = 0;
    while rr.sqrt() >= tol {
        if iterations == max_iter {
            return Err(ReferenceError::NotConverged {
                iterations,
                residual: rr.sqrt(),
                tol,
            });
        }
        let ap = a * &p;
        let curvature = p.dotc(&ap).re;
        if curvature <= 0.0 {
            return Err(ReferenceError::NotPositiveDefinite {
                iteration: iterations,
                curvature,
            });
        }
        let alpha = c(rr / curvature, 0.0);
        x += &p * alpha;
        r -= &ap * alpha;
        let rr_next = r.norm_squared();
        p = &r + &p * c(rr_next / rr, 0.0);
        rr = rr_next;
        iterations += 1;
    }
    let residual = (a * &x - b).norm();
    Ok(CGReport {
        solution: x,
        iterations,
        residual,
    })
}

/// Normalizes `A^{-1} b` and fixes its global phase.
pub fn normalized_solution(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    let x = direct_solve(a, b)?;
    let norm = x.norm();
    Ok(crate::qcore::canonicalize_phase(&(x / C64::new(norm, 0.0))))
}
