//! Run configuration: a TOML (or JSON) file with `system`, `solver`, `noise`,
//! `molecule`, `tomography` and `spectrum` sections. Numbers may be written as
//! decimal strings or plain literals.

use std::fmt;
use std::path::Path;

use hhl_core::circuit::NoiseModel;
use hhl_core::hhl::{
    demo_experiments, demo_matrix, InversionPath, LinearSystem, RotationMode, SolverConfig,
};
use hhl_core::nmr::{MoleculeParams, SHIFT_ANCHORS, SHIFT_SLOPES};
use hhl_core::qcore::{c, ComplexMatrix, ComplexVector};
use hhl_core::tomography::CatalogKind;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// A finite double read from a decimal string or a numeric literal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decimal(pub f64);

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        // Shortest round-trip form, so a snapshot parses back to the same bits.
        s.serialize_str(&format!("{:?}", self.0))
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Decimal;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a decimal number or a string holding one")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Decimal, E> {
                let x: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| E::custom(format!("'{v}' is not a decimal number")))?;
                self.visit_f64(x)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Decimal, E> {
                if v.is_finite() {
                    Ok(Decimal(v))
                } else {
                    Err(E::custom(format!("{v} is not finite")))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Decimal, E> {
                Ok(Decimal(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Decimal, E> {
                Ok(Decimal(v as f64))
            }
        }
        d.deserialize_any(V)
    }
}

fn dec(x: f64) -> Decimal {
    Decimal(x)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Real part of `A`, row major. Defaults to the 2x2 demo matrix.
    pub matrix: Option<Vec<Vec<Decimal>>>,
    pub matrix_imag: Option<Vec<Vec<Decimal>>>,
    /// `exp1`, `exp2` or `exp3`.
    pub experiment: Option<String>,
    /// `b = cos(theta/2)|0> + sin(theta/2)|1>`.
    pub theta: Option<Decimal>,
    /// Explicit right-hand side, normalized on load.
    pub b: Option<Vec<Decimal>>,
    pub b_imag: Option<Vec<Decimal>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Linear,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub t: usize,
    pub t0: Decimal,
    pub r: u32,
    pub mode: Mode,
    pub c_tilde: Option<Decimal>,
    pub inversion_path: InversionPath,
    pub require_exact_encoding: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            t: d.t,
            t0: dec(d.t0),
            r: d.r,
            mode: Mode::Linear,
            c_tilde: None,
            inversion_path: d.inversion_path,
            require_exact_encoding: d.require_exact_encoding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub enabled: bool,
    /// Experiment length in ms, split evenly over the gates.
    pub total_duration_ms: Decimal,
    pub pulse_error: Decimal,
    /// Gaussian noise on each readout peak quadrature. Needs a seed when > 0.
    pub readout_sigma: Decimal,
    /// Plausibility band for the noisy final-state fidelity, `[lo, hi)`.
    pub fidelity_band: [Decimal; 2],
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            enabled: false,
            total_duration_ms: dec(50.0),
            pulse_error: dec(0.01),
            readout_sigma: dec(0.0),
            fidelity_band: [dec(0.90), dec(1.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoleculeSection {
    pub temperature: Decimal,
    pub shift_anchors: [Decimal; 3],
    pub shift_slopes: [Decimal; 3],
    pub carbon_offset: Decimal,
    /// Carbon couplings to F1, F2, F3 (Hz).
    pub j_carbon: [Decimal; 3],
    /// Per-qubit `T2*` in ms, qubits C, F1, F2, F3.
    pub t2_star_ms: [Decimal; 4],
    pub linewidth: Decimal,
}

impl Default for MoleculeSection {
    fn default() -> Self {
        let m = MoleculeParams::default();
        Self {
            temperature: dec(303.0),
            shift_anchors: SHIFT_ANCHORS.map(dec),
            shift_slopes: SHIFT_SLOPES.map(dec),
            carbon_offset: dec(m.carbon_offset),
            j_carbon: [
                dec(m.j_couplings[0][1]),
                dec(m.j_couplings[0][2]),
                dec(m.j_couplings[0][3]),
            ],
            t2_star_ms: m.t2_star.map(dec),
            linewidth: dec(m.linewidth),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomographySection {
    pub catalog: CatalogKind,
    /// Route peak intensities through Lorentzian fits of synthetic spectra.
    pub fit: bool,
    pub points_per_hz: Decimal,
}

impl Default for TomographySection {
    fn default() -> Self {
        Self {
            catalog: CatalogKind::Full,
            fit: false,
            points_per_hz: dec(10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub points: usize,
    /// Extra span on each side of the outermost peaks (Hz).
    pub margin: Decimal,
    /// PPS polarization used by `spectrum --state pps`.
    pub pps_epsilon: Decimal,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            points: 4001,
            margin: dec(20.0),
            pps_epsilon: dec(1e-5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub r: Option<Vec<u32>>,
    pub t0: Option<Vec<Decimal>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub system: SystemConfig,
    pub solver: SolverSection,
    pub noise: NoiseSection,
    pub molecule: MoleculeSection,
    pub tomography: TomographySection,
    pub spectrum: SpectrumSection,
    pub sweep: SweepSection,
}

fn parse_error(msg: impl fmt::Display) -> CliError {
    CliError::ConfigParse(msg.to_string())
}

impl Config {
    pub fn from_str(text: &str, json: bool) -> Result<Self, CliError> {
        if json {
            serde_json::from_str(text).map_err(parse_error)
        } else {
            toml::from_str(text).map_err(parse_error)
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| parse_error(format!("{}: {e}", path.display())))?;
        let json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::from_str(&text, json)
    }

    pub fn solver(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            t: s.t,
            t0: s.t0.0,
            r: s.r,
            rotation_mode: match s.mode {
                Mode::Linear => RotationMode::LinearApprox,
                Mode::Exact => RotationMode::ExactArcsin,
            },
            c_tilde: s.c_tilde.map(|d| d.0),
            inversion_path: s.inversion_path,
            require_exact_encoding: s.require_exact_encoding,
        }
    }

    pub fn system(&self) -> Result<LinearSystem, CliError> {
        let sys = &self.system;
        let a = match &sys.matrix {
            None => {
                if sys.matrix_imag.is_some() {
                    return Err(CliError::Config("matrix_imag given without matrix".into()));
                }
                demo_matrix()
            }
            Some(re) => {
                let n = re.len();
                if n == 0 || re.iter().any(|row| row.len() != n) {
                    return Err(CliError::Config(
                        "matrix must be square and non-empty".into(),
                    ));
                }
                let im = sys
                    .matrix_imag
                    .clone()
                    .unwrap_or_else(|| vec![vec![dec(0.0); n]; n]);
                if im.len() != n || im.iter().any(|row| row.len() != n) {
                    return Err(CliError::Config("matrix_imag must match matrix".into()));
                }
                ComplexMatrix::from_fn(n, n, |i, j| c(re[i][j].0, im[i][j].0))
            }
        };
        let chosen = [
            sys.experiment.is_some(),
            sys.theta.is_some(),
            sys.b.is_some(),
        ]
        .iter()
        .filter(|&&x| x)
        .count();
        if chosen > 1 {
            return Err(CliError::Config(
                "set at most one of experiment, theta, b".into(),
            ));
        }
        if sys.b_imag.is_some() && sys.b.is_none() {
            return Err(CliError::Config("b_imag given without b".into()));
        }
        let result = if let Some(b) = &sys.b {
            let im = sys
                .b_imag
                .clone()
                .unwrap_or_else(|| vec![dec(0.0); b.len()]);
            if im.len() != b.len() {
                return Err(CliError::Config("b_imag must match b".into()));
            }
            LinearSystem::with_unnormalized(
                a,
                ComplexVector::from_iterator(b.len(), b.iter().zip(&im).map(|(x, y)| c(x.0, y.0))),
            )
        } else {
            let theta = match (&sys.theta, &sys.experiment) {
                (Some(t), _) => t.0,
                (None, name) => {
                    let name = name.as_deref().unwrap_or("exp1");
                    demo_experiments()
                        .into_iter()
                        .find(|e| e.name == name)
                        .ok_or_else(|| {
                            CliError::Config(format!(
                                "unknown experiment '{name}' (expected exp1, exp2, exp3)"
                            ))
                        })?
                        .theta
                }
            };
            LinearSystem::with_theta(a, theta)
        };
        Ok(result?)
    }

    pub fn molecule(&self) -> Result<MoleculeParams, CliError> {
        let m = &self.molecule;
        let [j1, j2, j3] = m.j_carbon.map(|d| d.0);
        let params = MoleculeParams {
            shift_anchors: m.shift_anchors.map(|d| d.0),
            shift_slopes: m.shift_slopes.map(|d| d.0),
            carbon_offset: m.carbon_offset.0,
            j_couplings: [
                [0.0, j1, j2, j3],
                [j1, 0.0, 0.0, 0.0],
                [j2, 0.0, 0.0, 0.0],
                [j3, 0.0, 0.0, 0.0],
            ],
            t2_star: m.t2_star_ms.map(|d| d.0),
            linewidth: m.linewidth.0,
        };
        params.validate()?;
        Ok(params)
    }

    /// The decoherence model when noise is enabled.
    pub fn noise_model(&self) -> Result<Option<NoiseModel>, CliError> {
        if !self.noise.enabled {
            return Ok(None);
        }
        let (d, p) = (self.noise.total_duration_ms.0, self.noise.pulse_error.0);
        if d < 0.0 || !(0.0..=1.0).contains(&p) {
            return Err(CliError::Config(
                "noise needs total_duration_ms >= 0 and pulse_error in [0, 1]".into(),
            ));
        }
        Ok(Some(self.molecule()?.noise_model(d, p)))
    }

    /// Seed for stochastic readout noise; mandatory when that noise is on.
    pub fn readout_seed(&self) -> Result<Option<u64>, CliError> {
        let sigma = self.noise.readout_sigma.0;
        if sigma < 0.0 {
            return Err(CliError::Config("readout_sigma must be >= 0".into()));
        }
        if sigma == 0.0 {
            return Ok(None);
        }
        self.seed.map(Some).ok_or_else(|| {
            CliError::Config("readout_sigma > 0 needs a seed (--seed or seed = N)".into())
        })
    }
}
