//! Gate-model circuits and their execution engines.
//!
//! Qubit `0` is the most significant bit of every basis label, so a circuit
//! over `(clock, clock, b, ancilla)` prints its kets exactly as `|q0 q1 q2 q3>`.

mod engine;
mod noise;
mod qft;
mod text;

use std::f64::consts::FRAC_1_SQRT_2;

use thiserror::Error;

use crate::qcore::{c, ensure_unitary, rotation_y, ComplexMatrix, QcoreError, STRUCTURAL_TOL};

pub use engine::{apply_gate, evolve_density, measure_qubit, run_circuit, MeasureQubit};
pub use noise::{NoiseChannel, NoiseEvent, NoiseModel, NoiseSchedule};
pub use qft::{inverse_qft, qft, qft_matrix};
pub use text::{parse_circuit, write_circuit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit circuit")]
    IndexOutOfRange { qubit: usize, n_qubits: usize },
    #[error("qubit {0} appears more than once in a gate")]
    DuplicateQubit(usize),
    #[error("gate matrix is {found}x{found}, expected {expected}x{expected}")]
    BlockSizeMismatch { expected: usize, found: usize },
    #[error("width mismatch: circuit has {expected} qubits, state has {found}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("measurement branch has probability {probability:e}")]
    ZeroProbabilityBranch { probability: f64 },
    #[error("Kraus operators are not complete (max |sum K^dagger K - I| = {deviation:e})")]
    IncompleteKrausSet { deviation: f64 },
    #[error("invalid noise parameter: {0}")]
    InvalidNoise(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

pub type Result<T> = std::result::Result<T, CircuitError>;

/// A control qubit together with the value it must hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Control {
    pub qubit: usize,
    pub value: bool,
}

impl Control {
    pub fn on(qubit: usize) -> Self {
        Self { qubit, value: true }
    }

    pub fn off(qubit: usize) -> Self {
        Self {
            qubit,
            value: false,
        }
    }

    /// Controls on `qubits` (most significant first) matching the bits of `value`.
    pub fn pattern(qubits: &[usize], value: usize) -> Vec<Control> {
        let k = qubits.len();
        qubits
            .iter()
            .enumerate()
            .map(|(pos, &qubit)| Control {
                qubit,
                value: (value >> (k - 1 - pos)) & 1 == 1,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Hadamard(usize),
    PhaseS(usize),
    RotationY {
        target: usize,
        theta: f64,
    },
    Swap(usize, usize),
    /// `matrix` acts on `targets` (first target = most significant bit of the
    /// block) when every control holds its required value.
    Controlled {
        controls: Vec<Control>,
        targets: Vec<usize>,
        matrix: ComplexMatrix,
    },
    Unitary {
        targets: Vec<usize>,
        matrix: ComplexMatrix,
    },
}

pub fn hadamard_matrix() -> ComplexMatrix {
    let h = FRAC_1_SQRT_2;
    ComplexMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)])
}

pub fn phase_s_matrix() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)])
}

pub fn swap_matrix() -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = c(1.0, 0.0);
    m[(1, 2)] = c(1.0, 0.0);
    m[(2, 1)] = c(1.0, 0.0);
    m[(3, 3)] = c(1.0, 0.0);
    m
}

impl Gate {
    pub fn controlled(controls: Vec<Control>, targets: Vec<usize>, matrix: ComplexMatrix) -> Gate {
        Gate::Controlled {
            controls,
            targets,
            matrix,
        }
    }

    pub fn targets(&self) -> Vec<usize> {
        match self {
            Gate::Hadamard(q) | Gate::PhaseS(q) => vec![*q],
            Gate::RotationY { target, .. } => vec![*target],
            Gate::Swap(a, b) => vec![*a, *b],
            Gate::Controlled { targets, .. } | Gate::Unitary { targets, .. } => targets.clone(),
        }
    }

    pub fn controls(&self) -> &[Control] {
        match self {
            Gate::Controlled { controls, .. } => controls,
            _ => &[],
        }
    }

    /// The block applied to the target qubits.
    pub fn matrix(&self) -> ComplexMatrix {
        match self {
            Gate::Hadamard(_) => hadamard_matrix(),
            Gate::PhaseS(_) => phase_s_matrix(),
            Gate::RotationY { theta, .. } => rotation_y(*theta),
            Gate::Swap(..) => swap_matrix(),
            Gate::Controlled { matrix, .. } | Gate::Unitary { matrix, .. } => matrix.clone(),
        }
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::Hadamard(q) => Gate::Hadamard(*q),
            Gate::PhaseS(q) => Gate::Unitary {
                targets: vec![*q],
                matrix: phase_s_matrix().adjoint(),
            },
            Gate::RotationY { target, theta } => Gate::RotationY {
                target: *target,
                theta: -theta,
            },
            Gate::Swap(a, b) => Gate::Swap(*a, *b),
            Gate::Controlled {
                controls,
                targets,
                matrix,
            } => Gate::Controlled {
                controls: controls.clone(),
                targets: targets.clone(),
                matrix: matrix.adjoint(),
            },
            Gate::Unitary { targets, matrix } => Gate::Unitary {
                targets: targets.clone(),
                matrix: matrix.adjoint(),
            },
        }
    }

    /// Relabels every qubit index through `map` (`new = map[old]`).
    pub fn remap(&self, map: &[usize]) -> Gate {
        let m = |q: &usize| map[*q];
        match self {
            Gate::Hadamard(q) => Gate::Hadamard(m(q)),
            Gate::PhaseS(q) => Gate::PhaseS(m(q)),
            Gate::RotationY { target, theta } => Gate::RotationY {
                target: m(target),
                theta: *theta,
            },
            Gate::Swap(a, b) => Gate::Swap(m(a), m(b)),
            Gate::Controlled {
                controls,
                targets,
                matrix,
            } => Gate::Controlled {
                controls: controls
                    .iter()
                    .map(|ctl| Control {
                        qubit: m(&ctl.qubit),
                        value: ctl.value,
                    })
                    .collect(),
                targets: targets.iter().map(m).collect(),
                matrix: matrix.clone(),
            },
            Gate::Unitary { targets, matrix } => Gate::Unitary {
                targets: targets.iter().map(m).collect(),
                matrix: matrix.clone(),
            },
        }
    }

    /// Checks indices, distinctness, block size, and unitarity.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let targets = self.targets();
        let mut seen = Vec::new();
        for q in targets
            .iter()
            .copied()
            .chain(self.controls().iter().map(|ctl| ctl.qubit))
        {
            if q >= n_qubits {
                return Err(CircuitError::IndexOutOfRange { qubit: q, n_qubits });
            }
            if seen.contains(&q) {
                return Err(CircuitError::DuplicateQubit(q));
            }
            seen.push(q);
        }
        if let Gate::Controlled { matrix, .. } | Gate::Unitary { matrix, .. } = self {
            let expected = 1usize << targets.len();
            if matrix.nrows() != expected || matrix.ncols() != expected {
                return Err(CircuitError::BlockSizeMismatch {
                    expected,
                    found: matrix.nrows(),
                });
            }
            ensure_unitary(matrix, STRUCTURAL_TOL)?;
        }
        if let Gate::RotationY { theta, .. } = self {
            if !theta.is_finite() {
                return Err(QcoreError::NonFinite.into());
            }
        }
        Ok(())
    }

    /// Dense `2^n x 2^n` matrix of this gate, built entry by entry from the
    /// definition: identity outside the control subspace, the block inside it.
    pub fn full_matrix(&self, n_qubits: usize) -> ComplexMatrix {
        let dim = 1usize << n_qubits;
        let targets = self.targets();
        let controls = self.controls();
        let block = self.matrix();
        let k = targets.len();
        let target_mask: usize = targets.iter().map(|&q| 1usize << (n_qubits - 1 - q)).sum();
        let sub = |idx: usize| -> usize {
            targets
                .iter()
                .fold(0, |acc, &q| (acc << 1) | ((idx >> (n_qubits - 1 - q)) & 1))
        };
        let active = |idx: usize| {
            controls
                .iter()
                .all(|ctl| ((idx >> (n_qubits - 1 - ctl.qubit)) & 1 == 1) == ctl.value)
        };
        debug_assert_eq!(block.nrows(), 1 << k);
        ComplexMatrix::from_fn(dim, dim, |i, j| {
            if i & !target_mask != j & !target_mask {
                return c(0.0, 0.0);
            }
            if active(j) {
                block[(sub(i), sub(j))]
            } else if i == j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
    }
}

/// A named group of qubits, e.g. the clock register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub qubits: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    registers: Vec<Register>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
            registers: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Option<&Register> {
        self.registers.iter().find(|r| r.name == name)
    }

    pub fn add_register(&mut self, name: &str, qubits: Vec<usize>) -> Result<()> {
        if let Some(&q) = qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(CircuitError::IndexOutOfRange {
                qubit: q,
                n_qubits: self.n_qubits,
            });
        }
        self.registers.push(Register {
            name: name.to_string(),
            qubits,
        });
        Ok(())
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = Gate>>(&mut self, gates: I) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Appends `other`, mapping its qubit `i` onto `map[i]` of this circuit.
    pub fn append_mapped(&mut self, other: &Circuit, map: &[usize]) -> Result<()> {
        if map.len() != other.n_qubits {
            return Err(CircuitError::WidthMismatch {
                expected: other.n_qubits,
                found: map.len(),
            });
        }
        for g in &other.gates {
            self.push(g.remap(map))?;
        }
        Ok(())
    }

    /// Gates reversed and individually inverted; registers are kept.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
            registers: self.registers.clone(),
        }
    }

    /// Product of all gate matrices, `U = G_last ... G_1`.
    pub fn unitary(&self) -> ComplexMatrix {
        let dim = 1usize << self.n_qubits;
        self.gates
            .iter()
            .fold(ComplexMatrix::identity(dim, dim), |acc, g| {
                g.full_matrix(self.n_qubits) * acc
            })
    }
}
