#![allow(dead_code)]

use hhl_core::qcore::{c, ComplexMatrix, ComplexVector, DensityMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_complex_vector<R: Rng>(rng: &mut R, n: usize) -> ComplexVector {
    ComplexVector::from_fn(n, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_unit_vector<R: Rng>(rng: &mut R, n: usize) -> ComplexVector {
    let v = random_complex_vector(rng, n);
    let norm = v.norm();
    v / c(norm, 0.0)
}

/// Haar-ish unitary from the QR factor of a Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    g.qr().q()
}

/// `U diag(values) U^dagger` for a random unitary `U`.
pub fn hermitian_with_spectrum<R: Rng>(rng: &mut R, values: &[f64]) -> ComplexMatrix {
    let u = random_unitary(rng, values.len());
    let d = ComplexMatrix::from_diagonal(&ComplexVector::from_iterator(
        values.len(),
        values.iter().map(|&l| c(l, 0.0)),
    ));
    let a = &u * d * u.adjoint();
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// Mixture of `rank` random pure states with random weights.
pub fn random_density<R: Rng>(rng: &mut R, n: usize, rank: usize) -> DensityMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    let mut total = 0.0;
    for _ in 0..rank {
        let w: f64 = rng.random_range(0.05..1.0);
        let v = random_unit_vector(rng, n);
        m += &v * v.adjoint() * c(w, 0.0);
        total += w;
    }
    m /= c(total, 0.0);
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    DensityMatrix::new(m).expect("mixture of pure states is a density matrix")
}
