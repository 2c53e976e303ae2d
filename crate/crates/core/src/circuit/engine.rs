use super::{Circuit, CircuitError, Control, Gate, NoiseSchedule, Result};
use crate::qcore::{c, ComplexMatrix, DensityMatrix, PureState, C64};

/// Applies `block` to `targets` of every basis slice whose controls match,
/// in place on an amplitude vector of `2^n_qubits` entries.
pub(crate) fn apply_block(
    amps: &mut [C64],
    n_qubits: usize,
    controls: &[Control],
    targets: &[usize],
    block: &ComplexMatrix,
) {
    let k = targets.len();
    let bit = |q: usize| 1usize << (n_qubits - 1 - q);
    let target_bits: Vec<usize> = targets.iter().map(|&q| bit(q)).collect();
    let target_mask: usize = target_bits.iter().sum();
    let offsets: Vec<usize> = (0..1usize << k)
        .map(|m| {
            (0..k)
                .filter(|&pos| (m >> (k - 1 - pos)) & 1 == 1)
                .map(|pos| target_bits[pos])
                .sum()
        })
        .collect();
    let (mut ctl_mask, mut ctl_value) = (0usize, 0usize);
    for ctl in controls {
        ctl_mask |= bit(ctl.qubit);
        if ctl.value {
            ctl_value |= bit(ctl.qubit);
        }
    }

    let mut gathered = vec![C64::new(0.0, 0.0); offsets.len()];
    for base in 0..amps.len() {
        if base & target_mask != 0 || base & ctl_mask != ctl_value {
            continue;
        }
        for (slot, &off) in gathered.iter_mut().zip(&offsets) {
            *slot = amps[base | off];
        }
        for (row, &off) in offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for (col, g) in gathered.iter().enumerate() {
                acc += block[(row, col)] * g;
            }
            amps[base | off] = acc;
        }
    }
}

/// Left-multiplies every column of `m` by the embedded operator.
fn apply_block_columns(
    m: &mut ComplexMatrix,
    n_qubits: usize,
    controls: &[Control],
    targets: &[usize],
    block: &ComplexMatrix,
) {
    let rows = m.nrows();
    for col in m.as_mut_slice().chunks_mut(rows) {
        apply_block(col, n_qubits, controls, targets, block);
    }
}

/// `K rho K^dagger` for an operator `K` embedded on `targets`.
pub(crate) fn conjugate(
    rho: &ComplexMatrix,
    n_qubits: usize,
    controls: &[Control],
    targets: &[usize],
    block: &ComplexMatrix,
) -> ComplexMatrix {
    let mut left = rho.clone();
    apply_block_columns(&mut left, n_qubits, controls, targets, block);
    let mut right = left.adjoint();
    apply_block_columns(&mut right, n_qubits, controls, targets, block);
    right.adjoint()
}

pub fn apply_gate(state: &PureState, gate: &Gate) -> Result<PureState> {
    let n = state.n_qubits();
    gate.validate(n)?;
    let mut amps = state.amplitudes().clone();
    apply_block(
        amps.as_mut_slice(),
        n,
        gate.controls(),
        &gate.targets(),
        &gate.matrix(),
    );
    Ok(PureState::from_raw(n, amps))
}

/// Applies the gates left to right.
pub fn run_circuit(state: &PureState, circuit: &Circuit) -> Result<PureState> {
    let n = state.n_qubits();
    if n != circuit.n_qubits() {
        return Err(CircuitError::WidthMismatch {
            expected: circuit.n_qubits(),
            found: n,
        });
    }
    let mut amps = state.amplitudes().clone();
    for gate in circuit.gates() {
        apply_block(
            amps.as_mut_slice(),
            n,
            gate.controls(),
            &gate.targets(),
            &gate.matrix(),
        );
    }
    Ok(PureState::from_raw(n, amps))
}

/// Evolves `rho` through `circuit`, applying scheduled noise channels
/// between gates.
pub fn evolve_density(
    rho: &DensityMatrix,
    circuit: &Circuit,
    noise: Option<&NoiseSchedule>,
) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    if n != circuit.n_qubits() {
        return Err(CircuitError::WidthMismatch {
            expected: circuit.n_qubits(),
            found: n,
        });
    }
    if let Some(schedule) = noise {
        schedule.validate(n)?;
    }
    let mut m = rho.matrix().clone();
    let apply_noise = |m: &mut ComplexMatrix, layer: usize| {
        if let Some(schedule) = noise {
            for event in schedule.events_after(layer) {
                let kraus = event.channel.kraus();
                let mut acc = ComplexMatrix::zeros(m.nrows(), m.ncols());
                for k in &kraus {
                    acc += conjugate(m, n, &[], &[event.qubit], k);
                }
                *m = acc;
            }
        }
    };
    apply_noise(&mut m, 0);
    for (i, gate) in circuit.gates().iter().enumerate() {
        m = conjugate(&m, n, gate.controls(), &gate.targets(), &gate.matrix());
        apply_noise(&mut m, i + 1);
    }
    Ok(DensityMatrix::from_raw(n, m))
}

const ZERO_BRANCH: f64 = 1e-14;

/// Projective measurement of a single qubit onto a chosen outcome.
pub trait MeasureQubit: Sized {
    /// Returns the outcome probability and the renormalized post-measurement state.
    fn measure_qubit(&self, qubit: usize, outcome: bool) -> Result<(f64, Self)>;
}

impl MeasureQubit for PureState {
    fn measure_qubit(&self, qubit: usize, outcome: bool) -> Result<(f64, Self)> {
        let n = self.n_qubits();
        if qubit >= n {
            return Err(CircuitError::IndexOutOfRange { qubit, n_qubits: n });
        }
        let bit = 1usize << (n - 1 - qubit);
        let mut amps = self.amplitudes().clone();
        let mut probability = 0.0;
        for (i, a) in amps.iter_mut().enumerate() {
            if (i & bit != 0) == outcome {
                probability += a.norm_sqr();
            } else {
                *a = c(0.0, 0.0);
            }
        }
        if probability < ZERO_BRANCH {
            return Err(CircuitError::ZeroProbabilityBranch { probability });
        }
        amps /= c(probability.sqrt(), 0.0);
        Ok((probability, PureState::from_raw(n, amps)))
    }
}

impl MeasureQubit for DensityMatrix {
    fn measure_qubit(&self, qubit: usize, outcome: bool) -> Result<(f64, Self)> {
        let n = self.n_qubits();
        if qubit >= n {
            return Err(CircuitError::IndexOutOfRange { qubit, n_qubits: n });
        }
        let bit = 1usize << (n - 1 - qubit);
        let keep = |i: usize| (i & bit != 0) == outcome;
        let m = self.matrix();
        let probability: f64 = (0..m.nrows())
            .filter(|&i| keep(i))
            .map(|i| m[(i, i)].re)
            .sum();
        if probability < ZERO_BRANCH {
            return Err(CircuitError::ZeroProbabilityBranch { probability });
        }
        let projected = ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
            if keep(i) && keep(j) {
                m[(i, j)] / probability
            } else {
                c(0.0, 0.0)
            }
        });
        Ok((probability, DensityMatrix::from_raw(n, projected)))
    }
}

pub fn measure_qubit<S: MeasureQubit>(state: &S, qubit: usize, outcome: bool) -> Result<(f64, S)> {
    state.measure_qubit(qubit, outcome)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    use proptest::prelude::*;

    use super::*;
    use crate::circuit::{hadamard_matrix, NoiseChannel, NoiseEvent};
    use crate::qcore::{max_abs, rotation_y, ComplexVector};

    fn ket(amps: &[f64]) -> PureState {
        PureState::from_real(amps).unwrap()
    }

    #[test]
    fn hadamard_on_zero() {
        let out = apply_gate(&PureState::zero(1), &Gate::Hadamard(0)).unwrap();
        assert!(
            (out.amplitudes() - ket(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).amplitudes()).norm() < 1e-15
        );
    }

    #[test]
    fn swap_moves_excitation() {
        // |01> -> |10>
        let out = apply_gate(&PureState::basis(2, 0b01), &Gate::Swap(0, 1)).unwrap();
        assert!((out.amplitude(0b10) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn s_on_one_gives_i() {
        let out = apply_gate(&PureState::basis(1, 1), &Gate::PhaseS(0)).unwrap();
        assert!((out.amplitude(1) - c(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn out_of_range_gate_is_rejected() {
        assert!(matches!(
            apply_gate(&PureState::zero(1), &Gate::Hadamard(1)),
            Err(CircuitError::IndexOutOfRange {
                qubit: 1,
                n_qubits: 1
            })
        ));
    }

    #[test]
    fn empty_circuit_is_identity_and_width_is_checked() {
        let psi = ket(&[0.6, 0.0, 0.0, 0.8]);
        assert_eq!(run_circuit(&psi, &Circuit::new(2)).unwrap(), psi);
        assert!(matches!(
            run_circuit(&psi, &Circuit::new(3)),
            Err(CircuitError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn measurement_examples() {
        let (p, post) = measure_qubit(&PureState::zero(1), 0, false).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(post, PureState::zero(1));

        let plus = ket(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        let (p, post) = measure_qubit(&plus, 0, true).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((post.amplitude(1) - c(1.0, 0.0)).norm() < 1e-15);

        assert!(matches!(
            measure_qubit(&PureState::zero(1), 0, true),
            Err(CircuitError::ZeroProbabilityBranch { .. })
        ));

        let (p, post) = measure_qubit(&plus.to_density(), 0, true).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!((post.matrix()[(1, 1)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn measurement_of_rotated_ancilla_branches() {
        // sum_j beta_j (sqrt(1 - a_j^2)|0> + a_j|1>)|j>, with ancilla as the last qubit.
        let betas: [f64; 2] = [0.6, 0.8];
        let a: [f64; 2] = [0.7, 0.25];
        let mut amps = vec![0.0; 4];
        for j in 0..2 {
            amps[2 * j] = betas[j] * (1.0 - a[j] * a[j]).sqrt();
            amps[2 * j + 1] = betas[j] * a[j];
        }
        let (p, _) = measure_qubit(&ket(&amps), 1, true).unwrap();
        let expected: f64 = (0..2).map(|j| (betas[j] * a[j]).powi(2)).sum();
        assert!((p - expected).abs() < 1e-15);
    }

    #[test]
    fn dephasing_suppresses_coherence() {
        let plus = ket(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).to_density();
        let mut schedule = NoiseSchedule::default();
        schedule.push(NoiseEvent {
            after_gate: 0,
            qubit: 0,
            channel: NoiseChannel::dephasing(1.0, 0.1).unwrap(),
        });
        let out = evolve_density(&plus, &Circuit::new(1), Some(&schedule)).unwrap();
        let ratio = out.matrix()[(0, 1)].norm() / plus.matrix()[(0, 1)].norm();
        assert!((ratio - (-0.1f64).exp()).abs() < 1e-12);
        assert!((ratio - 0.904_837_418_035_959_6).abs() < 1e-12);
        assert!((out.trace() - c(1.0, 0.0)).norm() < 1e-12);

        let mut zero_time = NoiseSchedule::default();
        zero_time.push(NoiseEvent {
            after_gate: 0,
            qubit: 0,
            channel: NoiseChannel::dephasing(5.0, 0.0).unwrap(),
        });
        let same = evolve_density(&plus, &Circuit::new(1), Some(&zero_time)).unwrap();
        assert!(max_abs(&(same.matrix() - plus.matrix())) < 1e-15);
    }

    #[test]
    fn incomplete_kraus_set_is_rejected() {
        let mut schedule = NoiseSchedule::default();
        schedule.push(NoiseEvent {
            after_gate: 0,
            qubit: 0,
            channel: NoiseChannel::Kraus(vec![hadamard_matrix() * c(0.5, 0.0)]),
        });
        let rho = PureState::zero(1).to_density();
        assert!(matches!(
            evolve_density(&rho, &Circuit::new(1), Some(&schedule)),
            Err(CircuitError::IncompleteKrausSet { .. })
        ));
    }

    fn sample_circuit(params: &[f64]) -> Circuit {
        let mut circ = Circuit::new(3);
        circ.push(Gate::Hadamard(0)).unwrap();
        circ.push(Gate::RotationY {
            target: 1,
            theta: params[0],
        })
        .unwrap();
        circ.push(Gate::PhaseS(2)).unwrap();
        circ.push(Gate::controlled(
            vec![Control::on(0), Control::off(2)],
            vec![1],
            rotation_y(params[1]),
        ))
        .unwrap();
        circ.push(Gate::Swap(0, 2)).unwrap();
        let u = crate::qcore::matrix_exp_hermitian(
            &crate::qcore::real_matrix(&[&[params[2], 0.3], &[0.3, -1.0]]),
            0.7,
        )
        .unwrap();
        circ.push(Gate::controlled(vec![Control::on(1)], vec![2], u.clone()))
            .unwrap();
        circ.push(Gate::Unitary {
            targets: vec![2, 0],
            matrix: u.kronecker(&rotation_y(params[0] * 0.5)),
        })
        .unwrap();
        circ
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

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, rng_seed: proptest::test_runner::RngSeed::Fixed(21), ..ProptestConfig::default() })]

        #[test]
        fn engine_matches_dense_oracle(psi in random_state(3), params in proptest::collection::vec(-PI..PI, 3)) {
            let circ = sample_circuit(&params);
            let out = run_circuit(&psi, &circ).unwrap();
            let dense = circ.unitary() * psi.amplitudes();
            prop_assert!((out.amplitudes() - &dense).norm() < 1e-9);
            prop_assert!((out.norm() - 1.0).abs() < 1e-10);

            let back = run_circuit(&out, &circ.inverse()).unwrap();
            prop_assert!((back.amplitudes() - psi.amplitudes()).norm() < 1e-10);
        }

        #[test]
        fn noiseless_density_evolution_matches_pure(psi in random_state(3), params in proptest::collection::vec(-PI..PI, 3)) {
            let circ = sample_circuit(&params);
            let pure = run_circuit(&psi, &circ).unwrap().to_density();
            let mixed = evolve_density(&psi.to_density(), &circ, None).unwrap();
            prop_assert!(max_abs(&(pure.matrix() - mixed.matrix())) < 1e-10);
        }

        #[test]
        fn noisy_evolution_preserves_trace(psi in random_state(3), params in proptest::collection::vec(-PI..PI, 3), p in 0.0f64..1.0, t in 0.0f64..3.0) {
            let circ = sample_circuit(&params);
            let model = crate::circuit::NoiseModel { t2_star: vec![1.0, 2.0, 0.5], total_duration: t, pulse_error: p };
            let schedule = model.schedule_for(&circ).unwrap();
            let out = evolve_density(&psi.to_density(), &circ, Some(&schedule)).unwrap();
            prop_assert!((out.trace() - c(1.0, 0.0)).norm() < 1e-10);
            prop_assert!(DensityMatrix::new(out.into_matrix()).is_ok());
        }
    }
}
