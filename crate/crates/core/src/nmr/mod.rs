//! Experimental layer of the four-spin register (one carbon, three fluorines):
//! pseudo-pure states, temperature drift of the fluorine shifts, carbon
//! spectrum synthesis and Lorentzian peak fitting.
//!
//! Qubit 0 is the carbon. The carbon line is split by its three couplings
//! into eight peaks, one per state `abc` of the fluorines; peak `abc` has
//! intensity `p(0abc) - p(1abc)` after a `pi/2` readout.

mod fit;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::NoiseModel;
use crate::qcore::{c, ComplexMatrix, DensityMatrix, QcoreError};

pub use fit::{lorentzian_fit, lorentzian_fit_from, FitReport};

/// Calibration window for the drift formulas, in kelvin.
pub const CALIBRATION_RANGE: (f64, f64) = (293.0, 313.0);
pub const REFERENCE_TEMPERATURE: f64 = 303.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NmrError {
    #[error("polarization {0} outside [0, 1]")]
    InvalidPolarization(f64),
    #[error("temperature {temperature} K outside the calibrated range [{}, {}] K", CALIBRATION_RANGE.0, CALIBRATION_RANGE.1)]
    OutOfCalibrationRange { temperature: f64 },
    #[error("invalid molecule parameters: {0}")]
    InvalidParams(String),
    #[error("expected a {expected}-qubit state, got {found} qubits")]
    WrongWidth { expected: usize, found: usize },
    #[error("Lorentzian fit did not converge after {iterations} iterations (relative residual {residual:e})")]
    FitDiverged { iterations: usize, residual: f64 },
    #[error("invalid fit input: {0}")]
    InvalidFitInput(String),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

pub type Result<T> = std::result::Result<T, NmrError>;

/// `(1 - eps)/16 I + eps |0000><0000|`.
pub fn pps_state(epsilon: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(NmrError::InvalidPolarization(epsilon));
    }
    let mut m = ComplexMatrix::identity(16, 16) * c((1.0 - epsilon) / 16.0, 0.0);
    m[(0, 0)] += c(epsilon, 0.0);
    Ok(DensityMatrix::new(m)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nucleus {
    F1,
    F2,
    F3,
}

impl Nucleus {
    pub const ALL: [Nucleus; 3] = [Nucleus::F1, Nucleus::F2, Nucleus::F3];

    fn index(self) -> usize {
        match self {
            Nucleus::F1 => 0,
            Nucleus::F2 => 1,
            Nucleus::F3 => 2,
        }
    }
}

/// Fluorine shifts at 303 K (Hz) and their temperature slopes (Hz/K).
pub const SHIFT_ANCHORS: [f64; 3] = [-33122.4, -42677.7, -56445.8];
pub const SHIFT_SLOPES: [f64; 3] = [-3.0, -1.3, 1.6];

/// Fluorine chemical shift in Hz at temperature `t` (K), linear in `t - 303`.
pub fn chemical_shift(nucleus: Nucleus, t: f64) -> Result<f64> {
    MoleculeParams::default().chemical_shift(nucleus, t)
}

/// Per-molecule constants. Couplings, `T2*` and linewidth are configuration
/// inputs; the defaults are placeholders that keep the eight carbon peaks
/// separated and ordered `001, 000, 011, 010, 101, 100, 111, 110` by
/// decreasing frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculeParams {
    pub shift_anchors: [f64; 3],
    pub shift_slopes: [f64; 3],
    /// Carbon line center relative to the transmitter (Hz).
    pub carbon_offset: f64,
    /// Symmetric coupling table (Hz) over qubits `C, F1, F2, F3`.
    pub j_couplings: [[f64; 4]; 4],
    /// Per-qubit `T2*` in ms.
    pub t2_star: [f64; 4],
    /// Full width at half maximum of every peak (Hz).
    pub linewidth: f64,
}

impl Default for MoleculeParams {
    fn default() -> Self {
        let (j12, j13, j14) = (200.0, 60.0, -20.0);
        Self {
            shift_anchors: SHIFT_ANCHORS,
            shift_slopes: SHIFT_SLOPES,
            carbon_offset: 0.0,
            j_couplings: [
                [0.0, j12, j13, j14],
                [j12, 0.0, 0.0, 0.0],
                [j13, 0.0, 0.0, 0.0],
                [j14, 0.0, 0.0, 0.0],
            ],
            t2_star: [500.0; 4],
            linewidth: 1.0,
        }
    }
}

impl MoleculeParams {
    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            for j in 0..4 {
                if self.j_couplings[i][j] != self.j_couplings[j][i] {
                    return Err(NmrError::InvalidParams(format!(
                        "J table not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if self.t2_star.iter().any(|&t| t <= 0.0 || !t.is_finite()) {
            return Err(NmrError::InvalidParams("T2* must be positive".into()));
        }
        if self.linewidth <= 0.0 || !self.linewidth.is_finite() {
            return Err(NmrError::InvalidParams("linewidth must be positive".into()));
        }
        Ok(())
    }

    pub fn chemical_shift(&self, nucleus: Nucleus, t: f64) -> Result<f64> {
        if !(CALIBRATION_RANGE.0..=CALIBRATION_RANGE.1).contains(&t) {
            return Err(NmrError::OutOfCalibrationRange { temperature: t });
        }
        let i = nucleus.index();
        Ok(self.shift_anchors[i] + self.shift_slopes[i] * (t - REFERENCE_TEMPERATURE))
    }

    /// Carbon peak frequency when the fluorines are in state `abc`: each
    /// coupling adds `+J/2` for a fluorine in `|0>` and `-J/2` in `|1>`.
    pub fn carbon_peak_frequency(&self, abc: usize) -> f64 {
        (1..4).fold(self.carbon_offset, |f, k| {
            let bit = (abc >> (3 - k)) & 1;
            let sign = if bit == 0 { 0.5 } else { -0.5 };
            f + sign * self.j_couplings[0][k]
        })
    }

    /// Decoherence model for an experiment of `total_duration` ms.
    pub fn noise_model(&self, total_duration: f64, pulse_error: f64) -> NoiseModel {
        NoiseModel {
            t2_star: self.t2_star.to_vec(),
            total_duration,
            pulse_error,
        }
    }
}

/// Fluorine states `abc` of the carbon peaks in display order.
pub const PEAK_ORDER: [usize; 8] = [0b001, 0b000, 0b011, 0b010, 0b101, 0b100, 0b111, 0b110];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Fluorine state `abc`, e.g. `"001"`.
    pub label: String,
    pub center: f64,
    pub intensity: f64,
    pub linewidth: f64,
    /// Basis indices `(0abc, 1abc)` whose population difference is the intensity.
    pub populations: (usize, usize),
}

impl Peak {
    pub fn value_at(&self, f: f64) -> f64 {
        lorentzian(f, self.center, self.intensity, self.linewidth)
    }
}

/// `I (w/2)^2 / ((f - f0)^2 + (w/2)^2)`: height `I` at `f0`, full width `w`.
pub fn lorentzian(f: f64, center: f64, intensity: f64, width: f64) -> f64 {
    let g = width / 2.0;
    intensity * g * g / ((f - center).powi(2) + g * g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub peaks: Vec<Peak>,
}

impl Spectrum {
    pub fn peak(&self, label: &str) -> Option<&Peak> {
        self.peaks.iter().find(|p| p.label == label)
    }

    pub fn value_at(&self, f: f64) -> f64 {
        self.peaks.iter().map(|p| p.value_at(f)).sum()
    }

    /// Evenly spaced `(frequency, amplitude)` samples, `n >= 2`.
    pub fn sample(&self, f_min: f64, f_max: f64, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(2);
        let step = (f_max - f_min) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                let f = f_min + step * i as f64;
                (f, self.value_at(f))
            })
            .collect()
    }

    /// Frequency window covering every peak with `margin` linewidths to spare.
    pub fn window(&self, margin: f64) -> (f64, f64) {
        let lo = self
            .peaks
            .iter()
            .map(|p| p.center - margin * p.linewidth)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .peaks
            .iter()
            .map(|p| p.center + margin * p.linewidth)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Intensities divided by `reference` (e.g. the pseudo-pure-state peak).
    pub fn relative_to(&self, reference: f64) -> Spectrum {
        let peaks = self
            .peaks
            .iter()
            .map(|p| Peak {
                intensity: p.intensity / reference,
                ..p.clone()
            })
            .collect();
        Spectrum { peaks }
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.intensity).collect()
    }
}

/// `frequency,amplitude` CSV with a header line.
pub fn samples_to_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("frequency,amplitude\n");
    for (f, a) in samples {
        let _ = writeln!(out, "{f:?},{a:?}");
    }
    out
}

/// Carbon spectrum of a four-qubit state after a `pi/2` readout.
pub fn synthesize_spectrum(rho: &DensityMatrix, params: &MoleculeParams) -> Result<Spectrum> {
    if rho.n_qubits() != 4 {
        return Err(NmrError::WrongWidth {
            expected: 4,
            found: rho.n_qubits(),
        });
    }
    params.validate()?;
    let pops = rho.populations();
    let peaks = PEAK_ORDER
        .iter()
        .map(|&abc| Peak {
            label: format!("{abc:03b}"),
            center: params.carbon_peak_frequency(abc),
            intensity: pops[abc] - pops[8 + abc],
            linewidth: params.linewidth,
            populations: (abc, 8 + abc),
        })
        .collect();
    Ok(Spectrum { peaks })
}

/// Height of the `000` peak of a pseudo-pure state with polarization `eps`.
pub fn pps_peak_intensity(epsilon: f64) -> f64 {
    epsilon
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::qcore::PureState;

    fn diag(p: &[f64]) -> DensityMatrix {
        DensityMatrix::new(ComplexMatrix::from_fn(16, 16, |i, j| {
            if i == j {
                c(p[i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        }))
        .unwrap()
    }

    #[test]
    fn pps_examples() {
        assert_eq!(pps_state(1.0).unwrap(), PureState::zero(4).to_density());
        assert_eq!(pps_state(0.0).unwrap(), DensityMatrix::maximally_mixed(4));
        let eps = 1e-5;
        let rho = pps_state(eps).unwrap();
        assert_eq!(rho.matrix()[(0, 0)].re, (1.0 - eps) / 16.0 + eps);
        assert_eq!(rho.matrix()[(5, 5)].re, (1.0 - eps) / 16.0);
        assert!(matches!(
            pps_state(1.5),
            Err(NmrError::InvalidPolarization(_))
        ));
    }

    #[test]
    fn drift_formulas() {
        assert_eq!(chemical_shift(Nucleus::F1, 303.0).unwrap(), -33122.4);
        assert_eq!(chemical_shift(Nucleus::F2, 303.0).unwrap(), -42677.7);
        assert_eq!(chemical_shift(Nucleus::F3, 303.0).unwrap(), -56445.8);
        assert!((chemical_shift(Nucleus::F1, 304.0).unwrap() + 33125.4).abs() < 1e-9);
        // -56445.8 + 1.6 * (302 - 303)
        assert!((chemical_shift(Nucleus::F3, 302.0).unwrap() + 56447.4).abs() < 1e-9);
        assert!(matches!(
            chemical_shift(Nucleus::F2, 320.0),
            Err(NmrError::OutOfCalibrationRange { .. })
        ));
    }

    #[test]
    fn peak_positions_follow_display_order() {
        let params = MoleculeParams::default();
        let freqs: Vec<f64> = PEAK_ORDER
            .iter()
            .map(|&abc| params.carbon_peak_frequency(abc))
            .collect();
        assert!(freqs.windows(2).all(|w| w[0] > w[1]), "{freqs:?}");
    }

    #[test]
    fn ground_state_gives_single_peak() {
        let spec =
            synthesize_spectrum(&PureState::zero(4).to_density(), &MoleculeParams::default())
                .unwrap();
        assert_eq!(spec.peak("000").unwrap().intensity, 1.0);
        assert_eq!(spec.peaks.iter().filter(|p| p.intensity != 0.0).count(), 1);
        let mixed = synthesize_spectrum(
            &DensityMatrix::maximally_mixed(4),
            &MoleculeParams::default(),
        )
        .unwrap();
        assert!(mixed.intensities().iter().all(|&i| i.abs() < 1e-15));
    }

    #[test]
    fn first_four_peaks_match_population_differences() {
        let p: Vec<f64> = (1..=16).map(|k| k as f64 / 136.0).collect();
        let spec = synthesize_spectrum(&diag(&p), &MoleculeParams::default()).unwrap();
        let expected = [p[1] - p[9], p[0] - p[8], p[3] - p[11], p[2] - p[10]];
        for (peak, e) in spec.peaks.iter().zip(expected) {
            assert!((peak.intensity - e).abs() < 1e-12);
        }
    }

    #[test]
    fn params_validation() {
        let mut params = MoleculeParams::default();
        params.j_couplings[0][1] = 3.0;
        assert!(params.validate().is_err());
        let params = MoleculeParams {
            linewidth: 0.0,
            ..MoleculeParams::default()
        };
        assert!(params.validate().is_err());
        let params = MoleculeParams {
            t2_star: [1.0, 1.0, -1.0, 1.0],
            ..MoleculeParams::default()
        };
        assert!(params.validate().is_err());
    }

    #[test]
    fn csv_export() {
        let spec =
            synthesize_spectrum(&pps_state(1.0).unwrap(), &MoleculeParams::default()).unwrap();
        let (lo, hi) = spec.window(10.0);
        let csv = samples_to_csv(&spec.sample(lo, hi, 5));
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("frequency,amplitude\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, rng_seed: proptest::test_runner::RngSeed::Fixed(11), ..ProptestConfig::default() })]

        #[test]
        fn pps_is_valid_for_any_polarization(eps in 1e-12f64..=1.0) {
            let rho = pps_state(eps).unwrap();
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn spectrum_is_linear_in_state(w in 0.0f64..1.0, a in prop::collection::vec(0.01f64..1.0, 16), b in prop::collection::vec(0.01f64..1.0, 16)) {
            let na: f64 = a.iter().sum();
            let nb: f64 = b.iter().sum();
            let ra = diag(&a.iter().map(|x| x / na).collect::<Vec<_>>());
            let rb = diag(&b.iter().map(|x| x / nb).collect::<Vec<_>>());
            let params = MoleculeParams::default();
            let mixed = synthesize_spectrum(&ra.mix(&rb, w).unwrap(), &params).unwrap();
            let sa = synthesize_spectrum(&ra, &params).unwrap();
            let sb = synthesize_spectrum(&rb, &params).unwrap();
            for ((m, x), y) in mixed.peaks.iter().zip(&sa.peaks).zip(&sb.peaks) {
                prop_assert!((m.intensity - (w * x.intensity + (1.0 - w) * y.intensity)).abs() < 1e-12);
            }
        }
    }
}
