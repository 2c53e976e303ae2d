use nalgebra::linalg::SymmetricEigen;

use super::{c, canonicalize_phase, ensure_hermitian, ComplexMatrix, ComplexVector, Result};

/// Eigen-decomposition `A = sum_j lambda_j |u_j><u_j|` of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending; each eigenvector column carries the
/// canonical global phase (first non-negligible entry real and positive).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Column `j` is the eigenvector for `values[j]`.
    pub vectors: ComplexMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, j: usize) -> ComplexVector {
        self.vectors.column(j).into_owned()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `lambda_max / lambda_min`.
    pub fn condition_number(&self) -> f64 {
        self.max().abs() / self.min().abs()
    }

    /// `sum_j f(lambda_j) |u_j><u_j|`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> num_complex::Complex64) -> ComplexMatrix {
        let diag = ComplexVector::from_iterator(self.dim(), self.values.iter().map(|&l| f(l)));
        let scaled = ComplexMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.vectors[(i, j)] * diag[j]
        });
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.apply_fn(|l| c(l, 0.0))
    }

    /// Coefficients `beta_j = <u_j|v>`.
    pub fn coefficients(&self, v: &ComplexVector) -> ComplexVector {
        self.vectors.adjoint() * v
    }
}

pub fn eig_hermitian(a: &ComplexMatrix) -> Result<Spectrum> {
    let n = ensure_hermitian(a)?;
    // Symmetrize so the solver sees an exactly Hermitian input.
    let sym = (a + a.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let v = canonicalize_phase(&eig.eigenvectors.column(i).into_owned());
        let v = &v / c(v.norm(), 0.0);
        vectors.set_column(col, &v);
    }
    Ok(Spectrum { values, vectors })
}

/// `exp(-i A t)` through the eigen-decomposition of `A`.
pub fn matrix_exp_hermitian(a: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let spectrum = eig_hermitian(a)?;
    Ok(spectrum.apply_fn(|l| c(0.0, -l * t).exp()))
}
