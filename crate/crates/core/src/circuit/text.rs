//! Line-oriented circuit format, one gate per line:
//!
//! ```text
//! qubits 4
//! register clock 0 1
//! h 0
//! s 1
//! ry 3 1.5707963267948966
//! swap 0 1
//! cu 0=1,1=0 2 <re> <im> <re> <im> ...
//! u 2,3 <re> <im> ...
//! ```
//!
//! Matrix entries are listed row-major as `re im` pairs. Floats use the
//! shortest representation that parses back to the same `f64`.

use std::fmt::Write as _;

use super::{Circuit, CircuitError, Control, Gate, Result};
use crate::qcore::{c, ComplexMatrix};

fn write_matrix(out: &mut String, m: &ComplexMatrix) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            let _ = write!(out, " {:?} {:?}", z.re, z.im);
        }
    }
}

fn join(qubits: &[usize]) -> String {
    qubits
        .iter()
        .map(|q| q.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub fn write_circuit(circuit: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "qubits {}", circuit.n_qubits());
    for reg in circuit.registers() {
        let qubits: Vec<String> = reg.qubits.iter().map(|q| q.to_string()).collect();
        let _ = writeln!(out, "register {} {}", reg.name, qubits.join(" "));
    }
    for gate in circuit.gates() {
        match gate {
            Gate::Hadamard(q) => {
                let _ = write!(out, "h {q}");
            }
            Gate::PhaseS(q) => {
                let _ = write!(out, "s {q}");
            }
            Gate::RotationY { target, theta } => {
                let _ = write!(out, "ry {target} {theta:?}");
            }
            Gate::Swap(a, b) => {
                let _ = write!(out, "swap {a} {b}");
            }
            Gate::Controlled {
                controls,
                targets,
                matrix,
            } => {
                let ctl: Vec<String> = controls
                    .iter()
                    .map(|ctl| format!("{}={}", ctl.qubit, u8::from(ctl.value)))
                    .collect();
                let _ = write!(out, "cu {} {}", ctl.join(","), join(targets));
                write_matrix(&mut out, matrix);
            }
            Gate::Unitary { targets, matrix } => {
                let _ = write!(out, "u {}", join(targets));
                write_matrix(&mut out, matrix);
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_circuit(text: &str) -> Result<Circuit> {
    let mut circuit: Option<Circuit> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| CircuitError::Parse {
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let kind = tokens.next().unwrap_or_default();
        let rest: Vec<&str> = tokens.collect();

        if kind == "qubits" {
            if circuit.is_some() {
                return Err(err("duplicate 'qubits' header".into()));
            }
            let n = rest
                .first()
                .ok_or_else(|| err("missing qubit count".into()))?;
            circuit = Some(Circuit::new(parse_usize(n).map_err(err)?));
            continue;
        }
        let circ = circuit
            .as_mut()
            .ok_or_else(|| err("'qubits' header must come first".into()))?;
        let arg = |i: usize| {
            rest.get(i)
                .copied()
                .ok_or_else(|| err(format!("'{kind}' expects more arguments")))
        };

        let gate = match kind {
            "register" => {
                let name = arg(0)?;
                let qubits = rest[1..]
                    .iter()
                    .map(|s| parse_usize(s))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(err)?;
                circ.add_register(name, qubits)
                    .map_err(|e| err(e.to_string()))?;
                continue;
            }
            "h" => Gate::Hadamard(parse_usize(arg(0)?).map_err(err)?),
            "s" => Gate::PhaseS(parse_usize(arg(0)?).map_err(err)?),
            "ry" => Gate::RotationY {
                target: parse_usize(arg(0)?).map_err(err)?,
                theta: parse_f64(arg(1)?).map_err(err)?,
            },
            "swap" => Gate::Swap(
                parse_usize(arg(0)?).map_err(err)?,
                parse_usize(arg(1)?).map_err(err)?,
            ),
            "cu" => {
                let controls = arg(0)?
                    .split(',')
                    .map(|item| {
                        let (q, v) = item
                            .split_once('=')
                            .ok_or_else(|| format!("bad control '{item}'"))?;
                        let value = match v {
                            "0" => false,
                            "1" => true,
                            _ => return Err(format!("control value must be 0 or 1, got '{v}'")),
                        };
                        Ok(Control {
                            qubit: parse_usize(q)?,
                            value,
                        })
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()
                    .map_err(err)?;
                let targets = parse_list(arg(1)?).map_err(err)?;
                let matrix = parse_matrix(&rest[2..], targets.len()).map_err(err)?;
                Gate::Controlled {
                    controls,
                    targets,
                    matrix,
                }
            }
            "u" => {
                let targets = parse_list(arg(0)?).map_err(err)?;
                let matrix = parse_matrix(&rest[1..], targets.len()).map_err(err)?;
                Gate::Unitary { targets, matrix }
            }
            other => return Err(err(format!("unknown gate '{other}'"))),
        };
        circ.push(gate).map_err(|e| err(e.to_string()))?;
    }
    circuit.ok_or(CircuitError::Parse {
        line: 0,
        message: "empty circuit file".into(),
    })
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.parse()
        .map_err(|_| format!("expected a qubit index, got '{s}'"))
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    s.parse()
        .map_err(|_| format!("expected a number, got '{s}'"))
}

fn parse_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',').map(parse_usize).collect()
}

fn parse_matrix(tokens: &[&str], k: usize) -> std::result::Result<ComplexMatrix, String> {
    let dim = 1usize << k;
    if tokens.len() != 2 * dim * dim {
        return Err(format!(
            "expected {} matrix numbers, got {}",
            2 * dim * dim,
            tokens.len()
        ));
    }
    let values = tokens
        .iter()
        .map(|t| parse_f64(t))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ComplexMatrix::from_fn(dim, dim, |i, j| {
        let base = 2 * (i * dim + j);
        c(values[base], values[base + 1])
    }))
}
