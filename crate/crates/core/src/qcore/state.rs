use super::{
    c, eig_hermitian, hermiticity_deviation, qubits_for_len, ComplexMatrix, ComplexVector,
    QcoreError, Result, C64, PSD_TOL, STRUCTURAL_TOL,
};

/// Normalized state vector over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amplitudes: ComplexVector,
}

impl PureState {
    pub fn new(amplitudes: ComplexVector) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STRUCTURAL_TOL {
            return Err(QcoreError::NotNormalized { norm });
        }
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Normalizes `amplitudes` before wrapping them.
    pub fn normalized(amplitudes: ComplexVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < 1e-300 || !norm.is_finite() {
            return Err(QcoreError::NotNormalized { norm });
        }
        Self::new(amplitudes / c(norm, 0.0))
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(ComplexVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&a| c(a, 0.0)),
        ))
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amplitudes = ComplexVector::zeros(1 << n_qubits);
        amplitudes[index] = c(1.0, 0.0);
        Self {
            n_qubits,
            amplitudes,
        }
    }

    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub(crate) fn from_raw(n_qubits: usize, amplitudes: ComplexVector) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        Self {
            n_qubits,
            amplitudes,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &ComplexVector {
        &self.amplitudes
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amplitudes[index]
    }

    pub fn into_amplitudes(self) -> ComplexVector {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(QcoreError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `self (x) other`, with `self` on the more significant qubits.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let amplitudes = self.amplitudes.kronecker(&other.amplitudes);
        PureState {
            n_qubits: self.n_qubits + other.n_qubits,
            amplitudes,
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits,
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }

    pub fn canonical(&self) -> PureState {
        PureState {
            n_qubits: self.n_qubits,
            amplitudes: super::canonicalize_phase(&self.amplitudes),
        }
    }
}

/// Trace-one, Hermitian, positive semidefinite matrix over `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let rho = Self::check_structure(matrix)?;
        let spectrum = eig_hermitian(&rho.matrix)?;
        if spectrum.min() < -PSD_TOL {
            return Err(QcoreError::InvalidDensityMatrix(format!(
                "negative eigenvalue {:e}",
                spectrum.min()
            )));
        }
        Ok(rho)
    }

    fn check_structure(matrix: ComplexMatrix) -> Result<Self> {
        let n = super::ensure_square(&matrix)?;
        let n_qubits = qubits_for_len(n)?;
        let deviation = hermiticity_deviation(&matrix);
        if deviation > STRUCTURAL_TOL {
            return Err(QcoreError::NotHermitian { deviation });
        }
        let trace = matrix.trace();
        if (trace - c(1.0, 0.0)).norm() > STRUCTURAL_TOL {
            return Err(QcoreError::InvalidDensityMatrix(format!(
                "trace {trace} != 1"
            )));
        }
        Ok(Self { n_qubits, matrix })
    }

    /// Wraps a matrix produced by a trace-preserving map of a valid state.
    pub(crate) fn from_raw(n_qubits: usize, matrix: ComplexMatrix) -> Self {
        debug_assert_eq!(matrix.nrows(), 1 << n_qubits);
        Self { n_qubits, matrix }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self {
            n_qubits,
            matrix: ComplexMatrix::identity(d, d) * c(1.0 / d as f64, 0.0),
        }
    }

    /// Projects a Hermitian-ish matrix onto the closest valid density matrix
    /// by clipping negative eigenvalues and renormalizing the trace.
    pub fn project(matrix: &ComplexMatrix) -> Result<Self> {
        let n = super::ensure_square(matrix)?;
        let n_qubits = qubits_for_len(n)?;
        let sym = (matrix + matrix.adjoint()) * c(0.5, 0.0);
        let spectrum = eig_hermitian(&sym)?;
        let clipped: Vec<f64> = spectrum.values.iter().map(|&l| l.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(QcoreError::InvalidDensityMatrix(
                "no positive spectral weight".into(),
            ));
        }
        let mut out = ComplexMatrix::zeros(n, n);
        for (j, &l) in clipped.iter().enumerate() {
            if l > 0.0 {
                let v = spectrum.vector(j);
                out += (&v * v.adjoint()) * c(l / total, 0.0);
            }
        }
        Ok(Self {
            n_qubits,
            matrix: out,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Diagonal populations `p_i = <i|rho|i>`.
    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    /// Mixture `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(QcoreError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            matrix: &self.matrix * c(w, 0.0) + &other.matrix * c(1.0 - w, 0.0),
        })
    }
}

/// `F = Tr(rho sigma) / sqrt(Tr(rho^2) Tr(sigma^2))`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QcoreError::DimensionMismatch {
            expected: rho.dim(),
            found: sigma.dim(),
        });
    }
    // Tr(rho sigma) = sum_ij rho_ij sigma_ji = sum_ij rho_ij conj(sigma_ij) for Hermitian sigma.
    let overlap: f64 = rho
        .matrix
        .iter()
        .zip(sigma.matrix.iter())
        .map(|(a, b)| (a * b.conj()).re)
        .sum();
    let f = overlap / (rho.purity() * sigma.purity()).sqrt();
    Ok(f.clamp(0.0, 1.0))
}

/// Reduced state on the qubits listed in `keep` (0-based, any order; the
/// result keeps them in ascending order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(QcoreError::EmptyKeepSet);
    }
    let n = rho.n_qubits;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&q) = kept.iter().find(|&&q| q >= n) {
        return Err(QcoreError::QubitOutOfRange {
            qubit: q,
            n_qubits: n,
        });
    }
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
    let k = kept.len();

    let compose = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in kept.iter().enumerate() {
            if (kept_bits >> (k - 1 - pos)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        for (pos, &q) in traced.iter().enumerate() {
            if (traced_bits >> (traced.len() - 1 - pos)) & 1 == 1 {
                idx |= 1 << (n - 1 - q);
            }
        }
        idx
    };

    let dk = 1 << k;
    let dt = 1 << traced.len();
    let mut out = ComplexMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..dt {
                acc += rho.matrix[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(DensityMatrix {
        n_qubits: k,
        matrix: out,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use proptest::prelude::*;

    use super::*;
    use crate::qcore::max_abs;

    fn ket(amps: &[f64]) -> PureState {
        PureState::from_real(amps).unwrap()
    }

    #[test]
    fn rejects_unnormalized_vectors() {
        assert!(matches!(
            PureState::from_real(&[1.0, 1.0]),
            Err(QcoreError::NotNormalized { .. })
        ));
        assert!(matches!(
            PureState::from_real(&[1.0, 0.0, 0.0]),
            Err(QcoreError::NotPowerOfTwo(3))
        ));
    }

    #[test]
    fn fidelity_examples() {
        let zero = ket(&[1.0, 0.0]).to_density();
        let one = ket(&[0.0, 1.0]).to_density();
        let plus = ket(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).to_density();
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-15);
        // Tr(|0><0| |+><+|) = 1/2, both purities 1.
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-15);
        let big = DensityMatrix::maximally_mixed(2);
        assert!(matches!(
            fidelity(&zero, &big),
            Err(QcoreError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fidelity_of_mixed_state_with_itself_is_one() {
        let rho = DensityMatrix::maximally_mixed(3);
        assert!((fidelity(&rho, &rho).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn density_validation() {
        let bad_trace = ComplexMatrix::identity(2, 2);
        assert!(matches!(
            DensityMatrix::new(bad_trace),
            Err(QcoreError::InvalidDensityMatrix(_))
        ));
        let negative = crate::qcore::real_matrix(&[&[1.5, 0.0], &[0.0, -0.5]]);
        assert!(matches!(
            DensityMatrix::new(negative),
            Err(QcoreError::InvalidDensityMatrix(_))
        ));
        let ok = crate::qcore::real_matrix(&[&[0.5, 0.5], &[0.5, 0.5]]);
        assert!(DensityMatrix::new(ok).is_ok());
    }

    #[test]
    fn trace_out_product_state() {
        // |0> (x) |1>, keep the second qubit.
        let rho = ket(&[0.0, 1.0, 0.0, 0.0]).to_density();
        let reduced = partial_trace(&rho, &[1]).unwrap();
        let expected = ket(&[0.0, 1.0]).to_density();
        assert!(max_abs(&(reduced.matrix() - expected.matrix())) < 1e-15);
        let first = partial_trace(&rho, &[0]).unwrap();
        assert!(max_abs(&(first.matrix() - ket(&[1.0, 0.0]).to_density().matrix())) < 1e-15);
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let bell = ket(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).to_density();
        for q in 0..2 {
            let reduced = partial_trace(&bell, &[q]).unwrap();
            assert!(
                max_abs(&(reduced.matrix() - DensityMatrix::maximally_mixed(1).matrix())) < 1e-15
            );
        }
    }

    #[test]
    fn partial_trace_errors() {
        let rho = PureState::zero(2).to_density();
        assert_eq!(partial_trace(&rho, &[]), Err(QcoreError::EmptyKeepSet));
        assert!(matches!(
            partial_trace(&rho, &[2]),
            Err(QcoreError::QubitOutOfRange { .. })
        ));
    }

    #[test]
    fn projection_clips_negative_weight() {
        let m = crate::qcore::real_matrix(&[&[1.1, 0.0], &[0.0, -0.1]]);
        let rho = DensityMatrix::project(&m).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(rho.matrix()[(1, 1)].norm() < 1e-12);
    }

    fn random_state(n_qubits: usize) -> impl Strategy<Value = PureState> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n_qubits).prop_filter_map(
            "zero",
            |v| {
                PureState::normalized(ComplexVector::from_iterator(
                    v.len(),
                    v.iter().map(|&(a, b)| c(a, b)),
                ))
                .ok()
            },
        )
    }

    fn random_density(n_qubits: usize) -> impl Strategy<Value = DensityMatrix> {
        (random_state(n_qubits), random_state(n_qubits), 0.0f64..1.0)
            .prop_map(|(a, b, w)| a.to_density().mix(&b.to_density(), w).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, rng_seed: proptest::test_runner::RngSeed::Fixed(11), ..ProptestConfig::default() })]

        #[test]
        fn fidelity_is_symmetric_and_bounded(rho in random_density(2), sigma in random_density(2)) {
            let f1 = fidelity(&rho, &sigma).unwrap();
            let f2 = fidelity(&sigma, &rho).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f1));
        }

        #[test]
        fn reduced_four_qubit_states_are_valid(psi in random_state(4)) {
            let reduced = partial_trace(&psi.to_density(), &[2, 3]).unwrap();
            prop_assert_eq!(reduced.n_qubits(), 2);
            prop_assert!((reduced.trace() - c(1.0, 0.0)).norm() < 1e-10);
            prop_assert!(hermiticity_deviation(reduced.matrix()) < 1e-10);
            prop_assert!(DensityMatrix::new(reduced.into_matrix()).is_ok());
        }
    }
}
