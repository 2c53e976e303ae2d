use std::f64::consts::PI;

use super::{phase_s_matrix, Circuit, Control, Gate};
use crate::qcore::{c, ComplexMatrix};

fn phase_matrix(phi: f64) -> ComplexMatrix {
    if (phi - PI / 2.0).abs() < 1e-15 {
        return phase_s_matrix();
    }
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, phi).exp()],
    )
}

/// Quantum Fourier transform on `t` qubits:
/// `|j> -> 2^{-t/2} sum_k exp(2 pi i j k / 2^t) |k>`.
///
/// Built from Hadamards, controlled phases (controlled-S for the
/// nearest-neighbour pair), and the final bit-reversal swaps.
pub fn qft(t: usize) -> Circuit {
    assert!(t >= 1, "QFT needs at least one qubit");
    let mut circ = Circuit::new(t);
    for j in 0..t {
        circ.push(Gate::Hadamard(j)).expect("valid");
        for k in (j + 1)..t {
            let phi = 2.0 * PI / f64::from(1u32 << (k - j + 1));
            circ.push(Gate::controlled(
                vec![Control::on(k)],
                vec![j],
                phase_matrix(phi),
            ))
            .expect("valid");
        }
    }
    for j in 0..t / 2 {
        circ.push(Gate::Swap(j, t - 1 - j)).expect("valid");
    }
    circ
}

pub fn inverse_qft(t: usize) -> Circuit {
    qft(t).inverse()
}

/// Dense Fourier matrix `F[j, k] = exp(2 pi i j k / 2^t) / 2^{t/2}`.
pub fn qft_matrix(t: usize) -> ComplexMatrix {
    let n = 1usize << t;
    let scale = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |j, k| {
        c(0.0, 2.0 * PI * ((j * k) % n) as f64 / n as f64).exp() * scale
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{hadamard_matrix, run_circuit};
    use crate::qcore::{max_abs, PureState};

    #[test]
    fn single_qubit_qft_is_hadamard() {
        assert!(max_abs(&(qft(1).unitary() - hadamard_matrix())) < 1e-15);
    }

    #[test]
    fn two_qubit_qft_on_zero_is_uniform() {
        let out = run_circuit(&PureState::zero(2), &qft(2)).unwrap();
        for a in out.amplitudes().iter() {
            assert!((a - c(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn circuit_matches_fourier_matrix() {
        for t in 1..=5 {
            assert!(
                max_abs(&(qft(t).unitary() - qft_matrix(t))) < 1e-12,
                "t = {t}"
            );
            assert!(
                max_abs(&(inverse_qft(t).unitary() - qft_matrix(t).adjoint())) < 1e-12,
                "t = {t}"
            );
        }
    }

    #[test]
    fn qft_then_inverse_is_identity() {
        let mut circ = qft(2);
        circ.extend(inverse_qft(2).gates().iter().cloned()).unwrap();
        assert!(max_abs(&(circ.unitary() - ComplexMatrix::identity(4, 4))) < 1e-10);
    }

    #[test]
    fn two_qubit_qft_uses_controlled_s() {
        let gates = qft(2);
        assert!(gates
            .gates()
            .iter()
            .any(|g| matches!(g, Gate::Controlled { matrix, .. } if *matrix == phase_s_matrix())));
    }
}
