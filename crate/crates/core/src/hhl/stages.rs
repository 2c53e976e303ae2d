use crate::circuit::{qft, run_circuit, Circuit, Control, Gate};
use crate::qcore::{matrix_exp_hermitian, unitary_with_first_column, PureState};

use super::{encoded_labels, HhlError, InversionPath, Layout, LinearSystem, Result, SolverConfig};

/// Controlled blocks `|tau><tau| (x) exp(-i A tau t0 / 2^t)` for every clock
/// value `tau`, acting on `[clock | B]` qubit indices.
pub fn conditional_evolution(sys: &LinearSystem, cfg: &SolverConfig) -> Result<Vec<Gate>> {
    cfg.validate()?;
    let layout = Layout::new(cfg.t, sys.b_qubits());
    let big_t = cfg.clock_size();
    (0..big_t)
        .map(|tau| {
            let u = matrix_exp_hermitian(sys.a(), tau as f64 * cfg.t0 / big_t as f64)?;
            Ok(Gate::controlled(
                Control::pattern(&layout.clock, tau),
                layout.b.clone(),
                u,
            ))
        })
        .collect()
}

/// Hadamards on the clock, conditional evolution, then the Fourier transform
/// on the clock, over `n_qubits` qubits of which the first `t + n_b` follow
/// the standard layout.
fn phase_estimation_circuit(
    sys: &LinearSystem,
    cfg: &SolverConfig,
    n_qubits: usize,
) -> Result<Circuit> {
    let layout = Layout::new(cfg.t, sys.b_qubits());
    let mut circ = Circuit::new(n_qubits);
    circ.extend(layout.clock.iter().map(|&q| Gate::Hadamard(q)))?;
    circ.extend(conditional_evolution(sys, cfg)?)?;
    circ.append_mapped(&qft(cfg.t), &layout.clock)?;
    Ok(circ)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEstimate {
    /// State over `[clock | B]`.
    pub state: PureState,
    /// Probability mass outside `sum_j |k_j>|u_j>`, where `k_j` is the clock
    /// label nearest to `lambda_j t0 / 2 pi`. Zero under exact encoding.
    pub leakage: f64,
}

/// Runs phase estimation on `|0...0>_clock (x) b_state`.
pub fn phase_estimate(
    sys: &LinearSystem,
    cfg: &SolverConfig,
    b_state: &PureState,
) -> Result<PhaseEstimate> {
    cfg.validate()?;
    if cfg.require_exact_encoding {
        encoded_labels(sys, cfg)?;
    }
    let n_b = sys.b_qubits();
    if b_state.n_qubits() != n_b {
        return Err(crate::qcore::QcoreError::DimensionMismatch {
            expected: n_b,
            found: b_state.n_qubits(),
        }
        .into());
    }
    let circ = phase_estimation_circuit(sys, cfg, cfg.t + n_b)?;
    let input = PureState::zero(cfg.t).tensor(b_state);
    let state = run_circuit(&input, &circ)?;

    let spectrum = sys.spectrum();
    let big_t = cfg.clock_size();
    let captured: f64 = (0..spectrum.dim())
        .map(|j| {
            let k =
                (cfg.label_of(spectrum.values[j]).round() as i64).rem_euclid(big_t as i64) as usize;
            let u = spectrum.vector(j);
            let amp: crate::qcore::C64 = (0..u.len())
                .map(|i| u[i].conj() * state.amplitude((k << n_b) | i))
                .sum();
            amp.norm_sqr()
        })
        .sum();
    Ok(PhaseEstimate {
        state,
        leakage: (1.0 - captured).max(0.0),
    })
}

/// Chooses the inversion route. SWAP is valid only for a two-qubit clock
/// whose occupied labels are 1 and 2, where swapping the bits maps `k` to `2/k`.
pub(super) fn resolve_path(sys: &LinearSystem, cfg: &SolverConfig) -> Result<InversionPath> {
    let swap_ok = || -> std::result::Result<(), String> {
        if cfg.t != 2 {
            return Err(format!("needs a 2-qubit clock, got t = {}", cfg.t));
        }
        let labels = encoded_labels(sys, cfg).map_err(|e| e.to_string())?;
        match labels.iter().find(|&&k| k != 1 && k != 2) {
            Some(k) => Err(format!(
                "clock label {k} has no reciprocal under the bit swap"
            )),
            None => Ok(()),
        }
    };
    match cfg.inversion_path {
        InversionPath::Lookup => Ok(InversionPath::Lookup),
        InversionPath::Swap => swap_ok()
            .map(|_| InversionPath::Swap)
            .map_err(HhlError::SwapPathUnavailable),
        InversionPath::Auto => Ok(if swap_ok().is_ok() {
            InversionPath::Swap
        } else {
            InversionPath::Lookup
        }),
    }
}

/// Ancilla rotations by `1/lambda`, with qubit indices in the full layout.
///
/// On the SWAP path the two clock qubits are exchanged first, so the register
/// holds `2/k` and each rotation is keyed on that reciprocal label. The
/// matching un-swap is not included. On the lookup path every nonzero clock
/// label gets its own controlled rotation.
pub fn eigenvalue_inversion_gates(
    sys: &LinearSystem,
    cfg: &SolverConfig,
) -> Result<(Vec<Gate>, InversionPath)> {
    cfg.validate()?;
    let layout = Layout::new(cfg.t, sys.b_qubits());
    let c_tilde = cfg.resolved_c_tilde(sys)?;
    let path = resolve_path(sys, cfg)?;
    let ry = |key: usize, k: usize| {
        let theta = cfg.rotation_angle(cfg.eigenvalue_of(k), c_tilde);
        Gate::controlled(
            Control::pattern(&layout.clock, key),
            vec![layout.ancilla],
            crate::qcore::rotation_y(theta),
        )
    };
    let gates = match path {
        InversionPath::Swap => {
            let mut gates = vec![Gate::Swap(layout.clock[0], layout.clock[1])];
            gates.extend([1usize, 2].into_iter().map(|k| ry(2 / k, k)));
            gates
        }
        _ => (1..cfg.clock_size()).map(|k| ry(k, k)).collect(),
    };
    Ok((gates, path))
}

/// The assembled circuit with the gate counts that end each stage.
#[derive(Debug, Clone, PartialEq)]
pub struct HhlCircuit {
    pub circuit: Circuit,
    pub layout: Layout,
    pub path: InversionPath,
    pub c_tilde: f64,
    /// Gate counts at the end of: loading `b`, phase estimation, inversion, uncompute.
    pub stage_ends: [usize; 4],
}

pub const STAGE_NAMES: [&str; 4] = ["load_b", "phase_estimation", "inversion", "uncompute"];

/// Full circuit from `|0...0>`: load `b`, phase estimation, inversion,
/// un-swap (SWAP path only), and inverse phase estimation. The ancilla is left
/// unmeasured.
pub fn build_circuit(sys: &LinearSystem, cfg: &SolverConfig) -> Result<HhlCircuit> {
    cfg.validate()?;
    if cfg.require_exact_encoding {
        encoded_labels(sys, cfg)?;
    }
    let layout = Layout::new(cfg.t, sys.b_qubits());
    let n = layout.n_qubits();
    let mut circ = Circuit::new(n);
    circ.add_register("clock", layout.clock.clone())?;
    circ.add_register("b", layout.b.clone())?;
    circ.add_register("ancilla", vec![layout.ancilla])?;

    circ.push(Gate::Unitary {
        targets: layout.b.clone(),
        matrix: unitary_with_first_column(sys.b())?,
    })?;
    let s1 = circ.len();

    let qpe = phase_estimation_circuit(sys, cfg, n)?;
    circ.extend(qpe.gates().iter().cloned())?;
    let s2 = circ.len();

    let (inversion, path) = eigenvalue_inversion_gates(sys, cfg)?;
    circ.extend(inversion)?;
    let s3 = circ.len();

    if path == InversionPath::Swap {
        circ.push(Gate::Swap(layout.clock[0], layout.clock[1]))?;
    }
    circ.extend(qpe.inverse().gates().iter().cloned())?;
    let s4 = circ.len();

    let c_tilde = cfg.resolved_c_tilde(sys)?;
    Ok(HhlCircuit {
        circuit: circ,
        layout,
        path,
        c_tilde,
        stage_ends: [s1, s2, s3, s4],
    })
}
