//! Dense complex linear algebra and quantum-state primitives.
//!
//! Everything here works on small dense matrices (a handful of qubits). Basis
//! labels use the big-endian convention: qubit 0 is the most significant bit of
//! a basis index, so `|q0 q1 q2 q3>` reads left to right like a printed ket.

mod eigen;
mod state;
mod zyz;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub use eigen::{eig_hermitian, matrix_exp_hermitian, Spectrum};
pub use state::{fidelity, partial_trace, DensityMatrix, PureState};
pub use zyz::{rotation_y, rotation_z, zyz_decompose, ZyzDecomposition};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Tolerance for structural properties (Hermiticity, trace, normalization).
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Tolerance for numerical round trips (reconstructions, products).
pub const ROUND_TRIP_TOL: f64 = 1e-9;
/// Smallest eigenvalue accepted in a density matrix.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QcoreError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not unitary (max |U^dagger U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("partial trace needs at least one qubit to keep")]
    EmptyKeepSet,
    #[error("non-finite matrix entry")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, QcoreError>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry of `|A - A^dagger|`.
pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Largest entry of `|U^dagger U - I|`.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - ComplexMatrix::identity(n, n)))
}

pub fn ensure_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(QcoreError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QcoreError::NonFinite);
    }
    Ok(m.nrows())
}

pub fn ensure_hermitian(m: &ComplexMatrix) -> Result<usize> {
    let n = ensure_square(m)?;
    let deviation = hermiticity_deviation(m);
    if deviation > STRUCTURAL_TOL {
        return Err(QcoreError::NotHermitian { deviation });
    }
    Ok(n)
}

pub fn ensure_unitary(m: &ComplexMatrix, tol: f64) -> Result<usize> {
    let n = ensure_square(m)?;
    let deviation = unitarity_deviation(m);
    if deviation > tol {
        return Err(QcoreError::NotUnitary { deviation });
    }
    Ok(n)
}

/// Number of qubits spanned by a vector or matrix side of length `len`.
pub fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(QcoreError::NotPowerOfTwo(len));
    }
    Ok(len.trailing_zeros() as usize)
}

/// Builds a real matrix from row slices.
pub fn real_matrix(rows: &[&[f64]]) -> ComplexMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    ComplexMatrix::from_fn(n, m, |i, j| c(rows[i][j], 0.0))
}

/// Multiplies a vector by the global phase that makes its first non-negligible
/// entry real and positive.
pub fn canonicalize_phase(v: &ComplexVector) -> ComplexVector {
    match v.iter().find(|z| z.norm() > 1e-12) {
        Some(first) => {
            let phase = first.conj() / first.norm();
            v.map(|z| z * phase)
        }
        None => v.clone(),
    }
}

/// Unitary whose first column is the unit vector `v` (a Householder
/// reflection composed with a phase), used to load `|v>` from `|0...0>`.
pub fn unitary_with_first_column(v: &ComplexVector) -> Result<ComplexMatrix> {
    let n = v.len();
    let norm = v.norm();
    if (norm - 1.0).abs() > STRUCTURAL_TOL {
        return Err(QcoreError::NotNormalized { norm });
    }
    let v0 = v[0];
    let phase = if v0.norm() > 1e-15 {
        v0 / v0.norm()
    } else {
        c(1.0, 0.0)
    };
    // H = I - 2 w w^dagger maps e0 to the unit vector `target`, with
    // target = conj(phase) * v so that w is well conditioned.
    let target = v.map(|z| z * phase.conj());
    let mut w = target.clone();
    w[0] -= c(1.0, 0.0);
    let wn = w.norm();
    let mut h = ComplexMatrix::identity(n, n);
    if wn > 1e-15 {
        let w = w / c(wn, 0.0);
        h -= (&w * w.adjoint()) * c(2.0, 0.0);
    }
    Ok(h * c(phase.re, phase.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn householder_loader_maps_zero_to_target() {
        let v = ComplexVector::from_vec(vec![c(0.0, 0.6), c(0.0, 0.0), c(0.8, 0.0), c(0.0, 0.0)]);
        let u = unitary_with_first_column(&v).unwrap();
        assert!(unitarity_deviation(&u) < 1e-12);
        assert!((u.column(0) - &v).norm() < 1e-12);

        let e1 = ComplexVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let u = unitary_with_first_column(&e1).unwrap();
        assert!((u.column(0) - &e1).norm() < 1e-12);
    }

    #[test]
    fn canonical_phase_makes_leading_entry_positive() {
        let v = ComplexVector::from_vec(vec![c(0.0, 0.0), c(0.0, -2.0), c(1.0, 0.0)]);
        let w = canonicalize_phase(&v);
        assert!((w[1] - c(2.0, 0.0)).norm() < 1e-15);
        assert!((w[2] - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_non_square() {
        let m = ComplexMatrix::zeros(2, 3);
        assert_eq!(
            ensure_square(&m),
            Err(QcoreError::NotSquare { rows: 2, cols: 3 })
        );
    }
}
