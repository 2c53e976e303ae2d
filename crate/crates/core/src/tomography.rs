//! Readout-pulse tomography through the carbon channel.
//!
//! A readout pulse `U` maps `rho` to `U rho U^dagger`; the carbon spectrum then
//! shows eight complex peaks `s_abc = 2 <0abc|rho'|1abc>`, one per fluorine
//! state `abc`. Pulse names follow the `E`/`X`/`Y` per-qubit notation with
//! optional `swapij` factors joined by `*`; `A*B` applies `B` first. Swap
//! indices in names are 1-based.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Gate;
use crate::nmr::{lorentzian, lorentzian_fit_from, MoleculeParams, NmrError, Peak, PEAK_ORDER};
use crate::qcore::{c, ComplexMatrix, DensityMatrix, QcoreError, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TomographyError {
    #[error("cannot parse readout pulse '{name}': {reason}")]
    InvalidPulse { name: String, reason: String },
    #[error("records determine only {rank} of {needed} parameters")]
    InsufficientRecords { rank: usize, needed: usize },
    #[error("missing record for pulse '{0}'")]
    MissingPulse(String),
    #[error("solution subspace mass {mass:e} is too small")]
    SubspaceMassTooSmall { mass: f64 },
    #[error("expected a 4-qubit state, got {0} qubits")]
    WrongWidth(usize),
    #[error("invalid readout noise: {0}")]
    InvalidNoise(String),
    #[error(transparent)]
    Nmr(#[from] NmrError),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

pub type Result<T> = std::result::Result<T, TomographyError>;

const N_QUBITS: usize = 4;
const DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Factor {
    /// One of `E`, `X`, `Y` per qubit.
    Local([char; N_QUBITS]),
    /// 0-based qubit pair.
    Swap(usize, usize),
}

/// A named readout pulse and its 16x16 operator.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutPulse {
    name: String,
    factors: Vec<Factor>,
    operator: ComplexMatrix,
}

fn half_pi_rotation(axis: char) -> ComplexMatrix {
    let (co, si) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
    match axis {
        'X' => {
            ComplexMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(0.0, -si), c(0.0, -si), c(co, 0.0)])
        }
        'Y' => {
            ComplexMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-si, 0.0), c(si, 0.0), c(co, 0.0)])
        }
        _ => ComplexMatrix::identity(2, 2),
    }
}

impl ReadoutPulse {
    pub fn parse(name: &str) -> Result<Self> {
        let invalid = |reason: String| TomographyError::InvalidPulse {
            name: name.to_string(),
            reason,
        };
        let mut factors = Vec::new();
        for part in name.split('*') {
            let part = part.trim();
            let lower = part.to_ascii_lowercase();
            if let Some(rest) = lower.strip_prefix("swap") {
                let digits: Vec<usize> = rest
                    .chars()
                    .filter(|ch| ch.is_ascii_digit())
                    .map(|ch| ch.to_digit(10).unwrap_or(0) as usize)
                    .collect();
                let valid = rest
                    .chars()
                    .all(|ch| ch.is_ascii_digit() || "_{}".contains(ch));
                match digits.as_slice() {
                    [i, j]
                        if valid
                            && (1..=N_QUBITS).contains(i)
                            && (1..=N_QUBITS).contains(j)
                            && i != j =>
                    {
                        factors.push(Factor::Swap(i - 1, j - 1))
                    }
                    _ => return Err(invalid(format!("bad swap factor '{part}'"))),
                }
            } else {
                let letters: Vec<char> = part.chars().collect();
                if letters.len() != N_QUBITS || letters.iter().any(|ch| !"EXY".contains(*ch)) {
                    return Err(invalid(format!(
                        "'{part}' is not four letters from E, X, Y"
                    )));
                }
                factors.push(Factor::Local([
                    letters[0], letters[1], letters[2], letters[3],
                ]));
            }
        }
        let operator = factors
            .iter()
            .fold(ComplexMatrix::identity(DIM, DIM), |acc, f| {
                acc * factor_matrix(*f)
            });
        Ok(Self {
            name: name.to_string(),
            factors,
            operator,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn operator(&self) -> &ComplexMatrix {
        &self.operator
    }
}

fn factor_matrix(f: Factor) -> ComplexMatrix {
    match f {
        Factor::Local(letters) => letters
            .iter()
            .skip(1)
            .fold(half_pi_rotation(letters[0]), |acc, &l| {
                acc.kronecker(&half_pi_rotation(l))
            }),
        Factor::Swap(a, b) => Gate::Swap(a, b).full_matrix(N_QUBITS),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogKind {
    Full,
    Partial,
}

const FULL_CATALOG: [&str; 44] = [
    "EEEE",
    "EXEE",
    "EYEE",
    "EEXE",
    "EXXE",
    "EYXE",
    "EEYE",
    "EXYE",
    "EYYE",
    "EEEX",
    "EXEX",
    "EYEX",
    "EEXX",
    "EXXX",
    "EYXX",
    "EEYX",
    "EXYX",
    "EYYX",
    "EEEY",
    "EXEY",
    "EYEY",
    "EEXY",
    "EXXY",
    "EYXY",
    "EEYY",
    "EXYY",
    "EYYY",
    "swap12*EEYY",
    "swap12*EEXY",
    "swap12*EEEY",
    "swap12*EEYX",
    "swap12*EEXX",
    "swap12*EEEX",
    "swap12*EEYE",
    "swap12*EEXE",
    "swap12*EEEE",
    "swap13*EEEY",
    "swap13*EEEX",
    "swap13*EEEE",
    "swap14*EEEE",
    "YEEE",
    "YEEE*swap12",
    "YEEE*swap13",
    "YEEE*swap14",
];

const PARTIAL_CATALOG: [&str; 5] = [
    "YEEE",
    "YEEE*swap12",
    "YEEE*swap13",
    "YEEE*swap14",
    "XEEE*swap13",
];

pub fn pulse_catalog(kind: CatalogKind) -> Vec<ReadoutPulse> {
    let names: &[&str] = match kind {
        CatalogKind::Full => &FULL_CATALOG,
        CatalogKind::Partial => &PARTIAL_CATALOG,
    };
    names
        .iter()
        .map(|n| ReadoutPulse::parse(n).expect("catalog names are valid"))
        .collect()
}

/// Outcome of one readout pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub pulse: String,
    /// Diagonal of `U rho U^dagger`.
    pub populations: Vec<f64>,
    /// Carbon peaks `s_abc` in display order (`PEAK_ORDER`).
    pub peaks: Vec<C64>,
}

/// Additive Gaussian noise on every peak quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutNoise {
    pub sigma: f64,
    pub seed: u64,
}

fn ensure_four_qubits(rho: &DensityMatrix) -> Result<()> {
    if rho.n_qubits() != N_QUBITS {
        return Err(TomographyError::WrongWidth(rho.n_qubits()));
    }
    Ok(())
}

pub fn simulate_readout(
    rho: &DensityMatrix,
    pulses: &[ReadoutPulse],
    noise: Option<ReadoutNoise>,
) -> Result<Vec<MeasurementRecord>> {
    ensure_four_qubits(rho)?;
    let mut records: Vec<MeasurementRecord> = pulses
        .par_iter()
        .map(|pulse| {
            let u = pulse.operator();
            let after = u * rho.matrix() * u.adjoint();
            MeasurementRecord {
                pulse: pulse.name().to_string(),
                populations: (0..DIM).map(|i| after[(i, i)].re).collect(),
                peaks: PEAK_ORDER
                    .iter()
                    .map(|&abc| after[(abc, 8 + abc)] * 2.0)
                    .collect(),
            }
        })
        .collect();
    if let Some(noise) = noise {
        if !(noise.sigma.is_finite() && noise.sigma >= 0.0) {
            return Err(TomographyError::InvalidNoise(format!(
                "sigma {} must be finite and non-negative",
                noise.sigma
            )));
        }
        let dist = Normal::new(0.0, noise.sigma)
            .map_err(|e| TomographyError::InvalidNoise(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        for record in &mut records {
            for s in &mut record.peaks {
                *s += c(dist.sample(&mut rng), dist.sample(&mut rng));
            }
        }
    }
    Ok(records)
}

/// Number of real parameters of a 16x16 Hermitian matrix.
const N_PARAMS: usize = DIM * DIM;

/// Column of real parameter `(k, l, part)`: diagonals first, then the real
/// and imaginary parts of the upper triangle.
fn upper_index(k: usize, l: usize) -> usize {
    // Position of (k, l), k < l, in row-major order of the strict upper triangle.
    k * (2 * DIM - k - 1) / 2 + (l - k - 1)
}

const N_UPPER: usize = DIM * (DIM - 1) / 2;

/// Real-linear rows mapping the 256 parameters of `rho` to `Re s` and `Im s`
/// of each peak of `pulse`.
fn observation_rows(pulse: &ReadoutPulse) -> Vec<([f64; N_PARAMS], [f64; N_PARAMS])> {
    let u = pulse.operator();
    PEAK_ORDER
        .iter()
        .map(|&abc| {
            // s = 2 Tr(rho O) with O = U^dagger |1abc><0abc| U.
            let bra0 = u.row(abc);
            let ket1 = u.row(8 + abc).adjoint();
            let o = &ket1 * bra0;
            let mut re = [0.0; N_PARAMS];
            let mut im = [0.0; N_PARAMS];
            for k in 0..DIM {
                let z = o[(k, k)] * 2.0;
                re[k] = z.re;
                im[k] = z.im;
                for l in (k + 1)..DIM {
                    let idx = upper_index(k, l);
                    // rho_kl = x + i y, rho_lk = x - i y.
                    let zx = (o[(l, k)] + o[(k, l)]) * 2.0;
                    let zy = (o[(l, k)] - o[(k, l)]) * c(0.0, 2.0);
                    re[DIM + idx] = zx.re;
                    im[DIM + idx] = zx.im;
                    re[DIM + N_UPPER + idx] = zy.re;
                    im[DIM + N_UPPER + idx] = zy.im;
                }
            }
            (re, im)
        })
        .collect()
}

fn parameters_to_matrix(p: &DVector<f64>) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(DIM, DIM);
    for k in 0..DIM {
        m[(k, k)] = c(p[k], 0.0);
        for l in (k + 1)..DIM {
            let idx = upper_index(k, l);
            let z = c(p[DIM + idx], p[DIM + N_UPPER + idx]);
            m[(k, l)] = z;
            m[(l, k)] = z.conj();
        }
    }
    m
}

fn pulses_for(records: &[MeasurementRecord]) -> Result<Vec<ReadoutPulse>> {
    records
        .iter()
        .map(|r| ReadoutPulse::parse(&r.pulse))
        .collect()
}

/// Linear least-squares inversion of the peak records plus unit trace,
/// followed by projection onto the density matrices (negative eigenvalues
/// clipped, trace renormalized).
pub fn reconstruct_density(records: &[MeasurementRecord]) -> Result<DensityMatrix> {
    let pulses = pulses_for(records)?;
    let n_rows = 2 * PEAK_ORDER.len() * records.len() + 1;
    let mut a = DMatrix::<f64>::zeros(n_rows, N_PARAMS);
    let mut y = DVector::<f64>::zeros(n_rows);
    let mut row = 0;
    for (pulse, record) in pulses.iter().zip(records) {
        if record.peaks.len() != PEAK_ORDER.len() {
            return Err(TomographyError::InvalidPulse {
                name: record.pulse.clone(),
                reason: "expected 8 peaks".into(),
            });
        }
        for ((re, im), s) in observation_rows(pulse).iter().zip(&record.peaks) {
            a.row_mut(row).copy_from_slice(re);
            y[row] = s.re;
            a.row_mut(row + 1).copy_from_slice(im);
            y[row + 1] = s.im;
            row += 2;
        }
    }
    for k in 0..DIM {
        a[(row, k)] = 1.0;
    }
    y[row] = 1.0;

    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    if rank < N_PARAMS {
        return Err(TomographyError::InsufficientRecords {
            rank,
            needed: N_PARAMS,
        });
    }
    let params = svd
        .solve(&y, 1e-10 * smax)
        .map_err(|e| QcoreError::InvalidDensityMatrix(e.to_string()))?;
    Ok(DensityMatrix::project(&parameters_to_matrix(&params))?)
}

/// Solution-subspace readout from the five-pulse catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSolution {
    /// Population of `|0001>` (`|c|^2`).
    pub c2: f64,
    /// Population of `|0011>` (`|d|^2`).
    pub d2: f64,
    /// `Re(c d*)`, from the fifth pulse.
    pub re_cd: f64,
    /// Sign of `Re(c d*)`: `1` or `-1`.
    pub sign: i8,
}

impl PartialSolution {
    /// `|c/d|^2`, i.e. `|x_0 / x_1|^2` of the solution.
    pub fn ratio(&self) -> Result<f64> {
        if self.d2 < 1e-10 {
            return Err(TomographyError::SubspaceMassTooSmall { mass: self.d2 });
        }
        Ok(self.c2 / self.d2)
    }

    /// Normalized real solution `(|c|, sign |d|) / sqrt(|c|^2 + |d|^2)`.
    pub fn solution(&self) -> [f64; 2] {
        let n = (self.c2 + self.d2).sqrt();
        [
            self.c2.max(0.0).sqrt() / n,
            f64::from(self.sign) * self.d2.max(0.0).sqrt() / n,
        ]
    }
}

fn find<'a>(records: &'a [MeasurementRecord], name: &str) -> Result<&'a MeasurementRecord> {
    records
        .iter()
        .find(|r| r.pulse == name)
        .ok_or_else(|| TomographyError::MissingPulse(name.to_string()))
}

/// Extracts `|c|^2`, `|d|^2` and the sign of `Re(c d*)` from the partial
/// catalog. The four `Y` pulses give the population difference across every
/// edge of the 4-bit hypercube; with unit trace these fix all 16 populations.
/// The `X` pulse after swapping qubits 1 and 3 turns the `c`-`d` coherence
/// into the real part of peak `001`.
pub fn extract_solution_partial(records: &[MeasurementRecord]) -> Result<PartialSolution> {
    let mut rows: Vec<[f64; DIM]> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    for name in &PARTIAL_CATALOG[..4] {
        let record = find(records, name)?;
        let pulse = ReadoutPulse::parse(name)?;
        for ((re, _), s) in observation_rows(&pulse).iter().zip(&record.peaks) {
            let mut diag = [0.0; DIM];
            diag.copy_from_slice(&re[..DIM]);
            rows.push(diag);
            y.push(s.re);
        }
    }
    rows.push([1.0; DIM]);
    y.push(1.0);
    let a = DMatrix::from_fn(rows.len(), DIM, |i, j| rows[i][j]);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    if rank < DIM {
        return Err(TomographyError::InsufficientRecords { rank, needed: DIM });
    }
    let pops = svd
        .solve(&DVector::from_vec(y), 1e-10 * smax)
        .map_err(|e| QcoreError::InvalidDensityMatrix(e.to_string()))?;
    let (c2, d2) = (pops[0b0001], pops[0b0011]);
    if c2 + d2 < 1e-10 {
        return Err(TomographyError::SubspaceMassTooSmall { mass: c2 + d2 });
    }
    let fifth = find(records, PARTIAL_CATALOG[4])?;
    let slot = PEAK_ORDER
        .iter()
        .position(|&abc| abc == 0b001)
        .expect("peak 001 exists");
    let re_cd = fifth.peaks[slot].re / 2.0;
    Ok(PartialSolution {
        c2,
        d2,
        re_cd,
        sign: if re_cd < 0.0 { -1 } else { 1 },
    })
}

/// Replaces each record's peaks by Lorentzian-fit intensities of synthetic
/// spectra (one for each quadrature) rendered with `params`, sampled at
/// `points_per_hz`.
pub fn fit_records(
    records: &[MeasurementRecord],
    params: &MoleculeParams,
    points_per_hz: f64,
) -> Result<Vec<MeasurementRecord>> {
    params.validate()?;
    let centers: Vec<f64> = PEAK_ORDER
        .iter()
        .map(|&abc| params.carbon_peak_frequency(abc))
        .collect();
    let w = params.linewidth;
    let lo = centers.iter().copied().fold(f64::INFINITY, f64::min) - 10.0 * w;
    let hi = centers.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 10.0 * w;
    let n = ((hi - lo) * points_per_hz).ceil().max(3.0 * 8.0) as usize + 1;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();

    let fit_quadrature = |values: Vec<f64>| -> Result<Vec<f64>> {
        let samples: Vec<(f64, f64)> = grid
            .iter()
            .map(|&f| {
                (
                    f,
                    centers
                        .iter()
                        .zip(&values)
                        .map(|(&c0, &v)| lorentzian(f, c0, v, w))
                        .sum(),
                )
            })
            .collect();
        let seeds: Vec<Peak> = centers
            .iter()
            .enumerate()
            .map(|(i, &c0)| Peak {
                label: format!("{i}"),
                center: c0,
                intensity: samples
                    .iter()
                    .min_by(|a, b| (a.0 - c0).abs().total_cmp(&(b.0 - c0).abs()))
                    .map_or(0.0, |s| s.1),
                linewidth: w,
                populations: (0, 0),
            })
            .collect();
        let fit = lorentzian_fit_from(&samples, &seeds)?;
        let mut out = vec![0.0; centers.len()];
        for p in fit.peaks {
            let i: usize = p.label.parse().expect("seed labels are indices");
            out[i] = p.intensity;
        }
        Ok(out)
    };

    records
        .par_iter()
        .map(|record| {
            let re = fit_quadrature(record.peaks.iter().map(|s| s.re).collect())?;
            let im = fit_quadrature(record.peaks.iter().map(|s| s.im).collect())?;
            Ok(MeasurementRecord {
                peaks: re.iter().zip(&im).map(|(&a, &b)| c(a, b)).collect(),
                ..record.clone()
            })
        })
        .collect()
}
