//! The six-stage linear-system pipeline: load `b`, phase estimation, ancilla
//! rotation by `1/lambda`, uncompute, post-selection, and comparison against a
//! classical solve.
//!
//! Register layout is `[clock | B | ancilla]`. For the 2x2 demo this puts the
//! two clock qubits at 0 and 1, the solution qubit at 2, and the ancilla at 3,
//! so the solution subspace reads `|0 0 x 1>`.

mod run;
mod stages;
mod sweep;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::CircuitError;
use crate::qcore::{
    c, canonicalize_phase, eig_hermitian, ensure_hermitian, qubits_for_len, real_matrix,
    ComplexMatrix, ComplexVector, PureState, QcoreError, Spectrum, C64, STRUCTURAL_TOL,
};
use crate::reference::ReferenceError;

pub use run::{
    final_density, predicted_success_probability, run_hhl, run_hhl_noisy, theoretical_final_state,
    Snapshot, SolveReport, MIN_SUCCESS_PROBABILITY,
};
pub use stages::{
    build_circuit, conditional_evolution, eigenvalue_inversion_gates, phase_estimate, HhlCircuit,
    PhaseEstimate,
};
pub use sweep::{sweep_r, sweep_t0, SweepRow};

/// Distance from an integer below which `lambda t0 / 2 pi` counts as exactly encoded.
pub const ENCODING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HhlError {
    #[error("eigenvalue {value} is not positive; the inversion needs a positive spectrum")]
    NonPositiveEigenvalue { value: f64 },
    #[error("eigenvalue {eigenvalue} maps to clock value {label}, which is not an integer in [1, {max_label}]")]
    EigenvalueNotEncodable {
        eigenvalue: f64,
        label: f64,
        max_label: usize,
    },
    #[error("SWAP inversion unavailable: {0}")]
    SwapPathUnavailable(String),
    #[error("post-selected branch has probability {probability:e}")]
    ZeroProbabilityBranch { probability: f64 },
    #[error("reference component {index} is zero; relative error undefined")]
    ZeroReferenceComponent { index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

pub type Result<T> = std::result::Result<T, HhlError>;

/// `A x = b` with Hermitian `A` and unit `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: ComplexMatrix,
    b: ComplexVector,
    spectrum: Spectrum,
}

impl LinearSystem {
    pub fn new(a: ComplexMatrix, b: ComplexVector) -> Result<Self> {
        let n = ensure_hermitian(&a)?;
        qubits_for_len(n)?;
        if b.len() != n {
            return Err(QcoreError::DimensionMismatch {
                expected: n,
                found: b.len(),
            }
            .into());
        }
        let norm = b.norm();
        if (norm - 1.0).abs() > STRUCTURAL_TOL {
            return Err(QcoreError::NotNormalized { norm }.into());
        }
        let spectrum = eig_hermitian(&a)?;
        if let Some(&value) = spectrum.values.iter().find(|&&l| l <= 0.0) {
            return Err(HhlError::NonPositiveEigenvalue { value });
        }
        Ok(Self { a, b, spectrum })
    }

    /// Normalizes `b` first.
    pub fn with_unnormalized(a: ComplexMatrix, b: ComplexVector) -> Result<Self> {
        let norm = b.norm();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(QcoreError::NotNormalized { norm }.into());
        }
        Self::new(a, b / c(norm, 0.0))
    }

    /// 2x2 system with `b = cos(theta/2)|0> + sin(theta/2)|1>`.
    pub fn with_theta(a: ComplexMatrix, theta: f64) -> Result<Self> {
        Self::new(a, prepare_b(theta).into_amplitudes())
    }

    /// The 2x2 demo matrix `[[3, 1], [1, 3]] / 2`, eigenvalues 1 and 2.
    pub fn demo(theta: f64) -> Self {
        Self::with_theta(demo_matrix(), theta).expect("demo system is valid")
    }

    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn b(&self) -> &ComplexVector {
        &self.b
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn b_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn condition_number(&self) -> f64 {
        self.spectrum.condition_number()
    }

    /// Eigenbasis coefficients `beta_j = <u_j|b>`.
    pub fn betas(&self) -> ComplexVector {
        self.spectrum.coefficients(&self.b)
    }

    /// The same matrix with a different right-hand side.
    pub fn with_b(&self, b: ComplexVector) -> Result<Self> {
        Self::new(self.a.clone(), b)
    }
}

pub fn demo_matrix() -> ComplexMatrix {
    real_matrix(&[&[1.5, 0.5], &[0.5, 1.5]])
}

/// Single-qubit `cos(theta/2)|0> + sin(theta/2)|1>`.
pub fn prepare_b(theta: f64) -> PureState {
    PureState::from_real(&[(theta / 2.0).cos(), (theta / 2.0).sin()]).expect("unit by construction")
}

/// Angle `theta` whose `prepare_b(theta)` is proportional to `A x` for a real
/// target solution `x` of a 2x2 system.
pub fn theta_for_solution(a: &ComplexMatrix, x: [f64; 2]) -> f64 {
    let x = ComplexVector::from_vec(vec![c(x[0], 0.0), c(x[1], 0.0)]);
    let b = a * x;
    let theta = 2.0 * b[1].re.atan2(b[0].re);
    theta.rem_euclid(2.0 * PI)
}

/// One of the three 2x2 demo inputs: a target ratio `|x_0 / x_1|^2` and the
/// input angle that produces it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DemoExperiment {
    pub name: &'static str,
    pub target_ratio: f64,
    pub theta: f64,
}

/// Inputs whose exact solutions have probability ratios 1:2, 3:1 and 1:1.
/// The angles are obtained by multiplying the target solution by `A`.
pub fn demo_experiments() -> [DemoExperiment; 3] {
    let a = demo_matrix();
    [
        DemoExperiment {
            name: "exp1",
            target_ratio: 0.5,
            theta: theta_for_solution(&a, [1.0, 2f64.sqrt()]),
        },
        DemoExperiment {
            name: "exp2",
            target_ratio: 3.0,
            theta: theta_for_solution(&a, [3f64.sqrt(), 1.0]),
        },
        DemoExperiment {
            name: "exp3",
            target_ratio: 1.0,
            theta: theta_for_solution(&a, [1.0, 1.0]),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationMode {
    /// `theta = (2 pi / 2^r) / lambda`, relying on `sin(theta/2) ~ theta/2`.
    LinearApprox,
    /// `theta = 2 arcsin(C / lambda)`.
    ExactArcsin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InversionPath {
    /// SWAP when it is a valid relabeling, otherwise lookup.
    Auto,
    /// Swap the two clock qubits so label `k` becomes `2/k`, then rotate.
    Swap,
    /// One controlled rotation per clock label.
    Lookup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Clock register width.
    pub t: usize,
    pub t0: f64,
    pub r: u32,
    pub rotation_mode: RotationMode,
    /// Normalization constant for `ExactArcsin`; defaults to the smallest
    /// eigenvalue. Ignored by `LinearApprox`.
    pub c_tilde: Option<f64>,
    pub inversion_path: InversionPath,
    /// Reject systems whose eigenvalues do not land on clock basis states.
    /// When off, the run proceeds and reports the leaked mass.
    pub require_exact_encoding: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t: 2,
            t0: 2.0 * PI,
            r: 2,
            rotation_mode: RotationMode::LinearApprox,
            c_tilde: None,
            inversion_path: InversionPath::Auto,
            require_exact_encoding: true,
        }
    }
}

impl SolverConfig {
    pub fn exact() -> Self {
        Self {
            rotation_mode: RotationMode::ExactArcsin,
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: RotationMode) -> Self {
        self.rotation_mode = mode;
        self
    }

    pub fn with_r(mut self, r: u32) -> Self {
        self.r = r;
        self
    }

    pub fn clock_size(&self) -> usize {
        1 << self.t
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.t > 10 {
            return Err(HhlError::InvalidConfig(format!(
                "clock width t = {} must be in 1..=10",
                self.t
            )));
        }
        if self.t0 <= 0.0 || !self.t0.is_finite() {
            return Err(HhlError::InvalidConfig(format!(
                "t0 = {} must be positive",
                self.t0
            )));
        }
        if self.r == 0 || self.r > 52 {
            return Err(HhlError::InvalidConfig(format!(
                "r = {} must be in 1..=52",
                self.r
            )));
        }
        if let Some(ct) = self.c_tilde {
            if ct <= 0.0 || !ct.is_finite() {
                return Err(HhlError::InvalidConfig(format!(
                    "C = {ct} must be positive"
                )));
            }
        }
        Ok(())
    }

    /// Clock value `lambda t0 / 2 pi` for eigenvalue `lambda` (not rounded).
    pub fn label_of(&self, lambda: f64) -> f64 {
        lambda * self.t0 / (2.0 * PI)
    }

    /// Eigenvalue represented by clock basis state `k`.
    pub fn eigenvalue_of(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.t0
    }

    /// Normalization constant actually used by the rotation.
    pub fn resolved_c_tilde(&self, sys: &LinearSystem) -> Result<f64> {
        let lambda_min = sys.spectrum().min();
        match (self.rotation_mode, self.c_tilde) {
            (RotationMode::ExactArcsin, Some(ct)) if ct > lambda_min * (1.0 + 1e-12) => Err(HhlError::InvalidConfig(
                format!("C = {ct} exceeds the smallest eigenvalue {lambda_min}; amplitudes C/lambda would exceed 1"),
            )),
            (RotationMode::ExactArcsin, Some(ct)) => Ok(ct),
            (RotationMode::ExactArcsin, None) => Ok(lambda_min),
            (RotationMode::LinearApprox, _) => Ok(effective_c_tilde(sys, self)),
        }
    }

    /// Ancilla rotation angle for eigenvalue `lambda`. Arcsin arguments above
    /// one (only possible for leaked clock labels) are clamped to `pi`.
    pub fn rotation_angle(&self, lambda: f64, c_tilde: f64) -> f64 {
        match self.rotation_mode {
            RotationMode::LinearApprox => 2.0 * PI / 2f64.powi(self.r as i32) / lambda,
            RotationMode::ExactArcsin => 2.0 * (c_tilde / lambda).min(1.0).asin(),
        }
    }

    /// Amplitude of the ancilla `|1>` branch for eigenvalue `lambda`.
    pub fn branch_amplitude(&self, lambda: f64, c_tilde: f64) -> f64 {
        (self.rotation_angle(lambda, c_tilde) / 2.0).sin()
    }
}

/// Qubit roles for a system of `n_b` solution qubits and a `t`-qubit clock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Layout {
    pub clock: Vec<usize>,
    pub b: Vec<usize>,
    pub ancilla: usize,
}

impl Layout {
    pub fn new(t: usize, n_b: usize) -> Self {
        Self {
            clock: (0..t).collect(),
            b: (t..t + n_b).collect(),
            ancilla: t + n_b,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.ancilla + 1
    }

    /// Basis index for clock value `k`, B index `i`, ancilla bit `a`.
    pub fn index(&self, k: usize, i: usize, a: usize) -> usize {
        (k << (self.b.len() + 1)) | (i << 1) | a
    }
}

/// Whether every eigenvalue sits exactly on a nonzero clock label.
pub fn encoded_labels(sys: &LinearSystem, cfg: &SolverConfig) -> Result<Vec<usize>> {
    let max_label = cfg.clock_size() - 1;
    sys.spectrum()
        .values
        .iter()
        .map(|&lambda| {
            let label = cfg.label_of(lambda);
            let k = label.round();
            if (label - k).abs() > ENCODING_TOL || k < 1.0 || k > max_label as f64 {
                Err(HhlError::EigenvalueNotEncodable {
                    eigenvalue: lambda,
                    label,
                    max_label,
                })
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

/// Mean over eigenvalues of `lambda_j * a_j`, where `a_j` is the ancilla
/// `|1>` amplitude: the normalization constant the rotation effectively uses.
pub fn effective_c_tilde(sys: &LinearSystem, cfg: &SolverConfig) -> f64 {
    let values = &sys.spectrum().values;
    let sum: f64 = values
        .iter()
        .map(|&l| {
            let theta = match cfg.rotation_mode {
                RotationMode::LinearApprox => cfg.rotation_angle(l, 0.0),
                RotationMode::ExactArcsin => {
                    cfg.rotation_angle(l, cfg.c_tilde.unwrap_or_else(|| sys.spectrum().min()))
                }
            };
            l * (theta / 2.0).sin()
        })
        .sum();
    sum / values.len() as f64
}

/// `max_i |x_exp,i - x_th,i| / |x_th,i|` after rotating `x_exp` onto the global
/// phase of `x_th`. Neither vector is renormalized.
pub fn max_relative_error(x_exp: &[C64], x_th: &[C64]) -> Result<f64> {
    if x_exp.len() != x_th.len() {
        return Err(QcoreError::DimensionMismatch {
            expected: x_th.len(),
            found: x_exp.len(),
        }
        .into());
    }
    if let Some(index) = x_th.iter().position(|z| z.norm() < 1e-14) {
        return Err(HhlError::ZeroReferenceComponent { index });
    }
    let overlap: C64 = x_exp.iter().zip(x_th).map(|(e, t)| e.conj() * t).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        c(1.0, 0.0)
    };
    Ok(x_exp
        .iter()
        .zip(x_th)
        .map(|(e, t)| (e * phase - t).norm() / t.norm())
        .fold(0.0, f64::max))
}

/// Unit vector with its first non-negligible entry real and positive.
pub fn normalize_canonical(v: &ComplexVector) -> ComplexVector {
    let n = v.norm();
    canonicalize_phase(&(v / c(n, 0.0)))
}

/// `<x|M|x>` for a user-supplied observable.
pub fn expectation(x: &ComplexVector, m: &ComplexMatrix) -> Result<f64> {
    let n = ensure_hermitian(m)?;
    if x.len() != n {
        return Err(QcoreError::DimensionMismatch {
            expected: n,
            found: x.len(),
        }
        .into());
    }
    Ok(x.dotc(&(m * x)).re)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use super::*;

    fn cv(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| c(x, 0.0)).collect()
    }

    #[test]
    fn prepare_b_examples() {
        assert_eq!(prepare_b(0.0).amplitudes(), PureState::zero(1).amplitudes());
        let half = prepare_b(PI / 2.0);
        assert!((half.amplitude(0).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((half.amplitude(1).re - FRAC_1_SQRT_2).abs() < 1e-15);
        let one = prepare_b(PI);
        assert!(one.amplitude(0).norm() < 1e-15 && (one.amplitude(1).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn system_validation() {
        let b = prepare_b(0.3).into_amplitudes();
        assert!(matches!(
            LinearSystem::new(real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]), b.clone()),
            Err(HhlError::NonPositiveEigenvalue { .. })
        ));
        assert!(matches!(
            LinearSystem::new(real_matrix(&[&[1.0, 2.0], &[0.0, 1.0]]), b.clone()),
            Err(HhlError::Qcore(QcoreError::NotHermitian { .. }))
        ));
        assert!(matches!(
            LinearSystem::new(demo_matrix(), b * c(2.0, 0.0)),
            Err(HhlError::Qcore(QcoreError::NotNormalized { .. }))
        ));
        let sys = LinearSystem::demo(0.0);
        assert!((sys.condition_number() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_rotation_amplitudes_at_r2() {
        let cfg = SolverConfig::default();
        assert!((cfg.rotation_angle(1.0, 0.0) - PI / 2.0).abs() < 1e-15);
        assert!((cfg.rotation_angle(2.0, 0.0) - PI / 4.0).abs() < 1e-15);
        assert!((cfg.branch_amplitude(1.0, 0.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((cfg.branch_amplitude(2.0, 0.0) - 0.38268).abs() < 5e-6);
    }

    #[test]
    fn exact_rotation_amplitudes() {
        let cfg = SolverConfig::exact();
        assert!((cfg.branch_amplitude(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((cfg.branch_amplitude(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(cfg.rotation_angle(0.5, 1.0), PI);
    }

    #[test]
    fn effective_c_tilde_matches_branch_average() {
        // (1 * sin(pi/4) + 2 * sin(pi/8)) / 2
        let expected = (FRAC_1_SQRT_2 + 2.0 * (PI / 8.0).sin()) / 2.0;
        let got = effective_c_tilde(&LinearSystem::demo(0.0), &SolverConfig::default());
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.736).abs() < 1e-3);
    }

    #[test]
    fn c_tilde_resolution() {
        let sys = LinearSystem::demo(0.0);
        assert_eq!(SolverConfig::exact().resolved_c_tilde(&sys).unwrap(), 1.0);
        let too_big = SolverConfig {
            c_tilde: Some(1.5),
            ..SolverConfig::exact()
        };
        assert!(matches!(
            too_big.resolved_c_tilde(&sys),
            Err(HhlError::InvalidConfig(_))
        ));
        let small = SolverConfig {
            c_tilde: Some(0.25),
            ..SolverConfig::exact()
        };
        assert_eq!(small.resolved_c_tilde(&sys).unwrap(), 0.25);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig {
            r: 0,
            ..SolverConfig::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            t: 0,
            ..SolverConfig::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            t0: -1.0,
            ..SolverConfig::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            c_tilde: Some(0.0),
            ..SolverConfig::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn encoding_check() {
        let sys = LinearSystem::demo(0.0);
        assert_eq!(
            encoded_labels(&sys, &SolverConfig::default()).unwrap(),
            vec![1, 2]
        );
        let off = SolverConfig {
            t0: 5.0,
            ..SolverConfig::default()
        };
        assert!(matches!(
            encoded_labels(&sys, &off),
            Err(HhlError::EigenvalueNotEncodable { .. })
        ));
        // lambda = 2 at t0 = 4 pi needs label 4, beyond a 2-qubit clock.
        let wide = SolverConfig {
            t0: 4.0 * PI,
            ..SolverConfig::default()
        };
        assert!(encoded_labels(&sys, &wide).is_err());
        assert_eq!(
            encoded_labels(&sys, &SolverConfig { t: 3, ..wide }).unwrap(),
            vec![2, 4]
        );
    }

    #[test]
    fn relative_error_examples() {
        let h = FRAC_1_SQRT_2;
        assert_eq!(max_relative_error(&cv(&[h, h]), &cv(&[h, h])).unwrap(), 0.0);
        let err = max_relative_error(&cv(&[1.07 * h, h]), &cv(&[h, h])).unwrap();
        assert!((err - 0.07).abs() < 1e-12);
        assert!(matches!(
            max_relative_error(&cv(&[1.0, 0.0]), &cv(&[1.0, 0.0])),
            Err(HhlError::ZeroReferenceComponent { index: 1 })
        ));
        // A global phase on the measured vector is not an error.
        let rotated: Vec<C64> = cv(&[0.6, 0.8]).iter().map(|z| z * c(0.0, 1.0)).collect();
        assert!(max_relative_error(&rotated, &cv(&[0.6, 0.8])).unwrap() < 1e-15);
    }

    #[test]
    fn demo_inputs_hit_target_ratios() {
        let a = demo_matrix();
        for exp in demo_experiments() {
            let sys = LinearSystem::with_theta(a.clone(), exp.theta).unwrap();
            let x = crate::reference::direct_solve(sys.a(), sys.b()).unwrap();
            let ratio = x[0].norm_sqr() / x[1].norm_sqr();
            assert!(
                (ratio - exp.target_ratio).abs() < 1e-12,
                "{}: {ratio}",
                exp.name
            );
            assert!(x[0].re > 0.0 && x[1].re > 0.0);
        }
        assert!((demo_experiments()[2].theta - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn expectation_of_pauli_z() {
        let z = real_matrix(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let x = ComplexVector::from_vec(cv(&[0.6, 0.8]));
        assert!((expectation(&x, &z).unwrap() - (0.36 - 0.64)).abs() < 1e-15);
    }
}
