use serde::{Deserialize, Serialize};

use super::{Circuit, CircuitError, Result};
use crate::qcore::{c, max_abs, ComplexMatrix, STRUCTURAL_TOL};

/// Single-qubit noise channel.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseChannel {
    /// Pure dephasing at `rate = 1/T2*` for `duration` (same time unit):
    /// off-diagonal elements shrink by `exp(-rate * duration)`.
    Dephasing { rate: f64, duration: f64 },
    /// Depolarizing error with probability `probability`.
    Depolarizing { probability: f64 },
    /// Arbitrary Kraus operators; completeness is checked before use.
    Kraus(Vec<ComplexMatrix>),
}

fn pauli(which: char) -> ComplexMatrix {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let entries = match which {
        'x' => [z, one, one, z],
        'y' => [z, c(0.0, -1.0), c(0.0, 1.0), z],
        'z' => [one, z, z, -one],
        _ => [one, z, z, one],
    };
    ComplexMatrix::from_row_slice(2, 2, &entries)
}

impl NoiseChannel {
    pub fn dephasing(rate: f64, duration: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) || !(duration >= 0.0 && duration.is_finite()) {
            return Err(CircuitError::InvalidNoise(format!(
                "dephasing rate {rate}, duration {duration}"
            )));
        }
        Ok(Self::Dephasing { rate, duration })
    }

    pub fn depolarizing(probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(CircuitError::InvalidNoise(format!(
                "depolarizing probability {probability}"
            )));
        }
        Ok(Self::Depolarizing { probability })
    }

    pub fn kraus(&self) -> Vec<ComplexMatrix> {
        match self {
            NoiseChannel::Dephasing { rate, duration } => {
                let lambda = (-rate * duration).exp();
                vec![
                    pauli('i') * c(((1.0 + lambda) / 2.0).sqrt(), 0.0),
                    pauli('z') * c(((1.0 - lambda) / 2.0).sqrt(), 0.0),
                ]
            }
            NoiseChannel::Depolarizing { probability } => {
                let p = *probability;
                vec![
                    pauli('i') * c((1.0 - 0.75 * p).sqrt(), 0.0),
                    pauli('x') * c((p / 4.0).sqrt(), 0.0),
                    pauli('y') * c((p / 4.0).sqrt(), 0.0),
                    pauli('z') * c((p / 4.0).sqrt(), 0.0),
                ]
            }
            NoiseChannel::Kraus(ops) => ops.clone(),
        }
    }

    /// Errors unless `sum_i K_i^dagger K_i = I` within tolerance.
    pub fn check_completeness(&self) -> Result<()> {
        let ops = self.kraus();
        if ops.iter().any(|k| k.nrows() != 2 || k.ncols() != 2) {
            return Err(CircuitError::InvalidNoise(
                "Kraus operators must be 2x2".into(),
            ));
        }
        let sum = ops
            .iter()
            .fold(ComplexMatrix::zeros(2, 2), |acc, k| acc + k.adjoint() * k);
        let deviation = max_abs(&(sum - ComplexMatrix::identity(2, 2)));
        if deviation > STRUCTURAL_TOL {
            return Err(CircuitError::IncompleteKrausSet { deviation });
        }
        Ok(())
    }
}

/// A channel applied to one qubit once `after_gate` gates have run
/// (`0` means before the first gate).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEvent {
    pub after_gate: usize,
    pub qubit: usize,
    pub channel: NoiseChannel,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseSchedule {
    events: Vec<NoiseEvent>,
}

impl NoiseSchedule {
    pub fn push(&mut self, event: NoiseEvent) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[NoiseEvent] {
        &self.events
    }

    pub fn events_after(&self, gates_done: usize) -> impl Iterator<Item = &NoiseEvent> {
        self.events
            .iter()
            .filter(move |e| e.after_gate == gates_done)
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for e in &self.events {
            if e.qubit >= n_qubits {
                return Err(CircuitError::IndexOutOfRange {
                    qubit: e.qubit,
                    n_qubits,
                });
            }
            e.channel.check_completeness()?;
        }
        Ok(())
    }
}

/// Decoherence model for a whole circuit run: per-qubit `T2*`, the total
/// experiment time split evenly over gate layers, and a depolarizing pulse
/// error applied to every qubit at the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-qubit `T2*`, same unit as `total_duration`.
    pub t2_star: Vec<f64>,
    pub total_duration: f64,
    pub pulse_error: f64,
}

impl NoiseModel {
    pub fn schedule_for(&self, circuit: &Circuit) -> Result<NoiseSchedule> {
        let n = circuit.n_qubits();
        if self.t2_star.len() != n {
            return Err(CircuitError::InvalidNoise(format!(
                "{} T2* values for {n} qubits",
                self.t2_star.len()
            )));
        }
        if self.t2_star.iter().any(|&t| t <= 0.0 || !t.is_finite()) {
            return Err(CircuitError::InvalidNoise("T2* must be positive".into()));
        }
        let layers = circuit.len().max(1);
        let slice = self.total_duration / layers as f64;
        let mut schedule = NoiseSchedule::default();
        for layer in 1..=layers {
            for (qubit, &t2) in self.t2_star.iter().enumerate() {
                schedule.push(NoiseEvent {
                    after_gate: layer,
                    qubit,
                    channel: NoiseChannel::dephasing(1.0 / t2, slice)?,
                });
            }
        }
        if self.pulse_error > 0.0 {
            let channel = NoiseChannel::depolarizing(self.pulse_error)?;
            for qubit in 0..n {
                schedule.push(NoiseEvent {
                    after_gate: layers,
                    qubit,
                    channel: channel.clone(),
                });
            }
        }
        Ok(schedule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_channels_are_complete() {
        NoiseChannel::dephasing(2.0, 0.3)
            .unwrap()
            .check_completeness()
            .unwrap();
        NoiseChannel::depolarizing(0.37)
            .unwrap()
            .check_completeness()
            .unwrap();
        assert!(NoiseChannel::depolarizing(1.5).is_err());
        assert!(NoiseChannel::dephasing(-1.0, 1.0).is_err());
    }

    #[test]
    fn schedule_splits_duration_over_layers() {
        let mut circ = Circuit::new(2);
        circ.push(super::super::Gate::Hadamard(0)).unwrap();
        circ.push(super::super::Gate::Hadamard(1)).unwrap();
        let model = NoiseModel {
            t2_star: vec![10.0, 20.0],
            total_duration: 4.0,
            pulse_error: 0.0,
        };
        let schedule = model.schedule_for(&circ).unwrap();
        assert_eq!(schedule.events().len(), 4);
        let total: f64 = schedule
            .events()
            .iter()
            .filter(|e| e.qubit == 0)
            .map(|e| match e.channel {
                NoiseChannel::Dephasing { duration, .. } => duration,
                _ => 0.0,
            })
            .sum();
        assert!((total - 4.0).abs() < 1e-15);
        let wrong = NoiseModel {
            t2_star: vec![1.0],
            ..model
        };
        assert!(wrong.schedule_for(&circ).is_err());
    }
}
