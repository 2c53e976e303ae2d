use std::f64::consts::PI;

use super::{c, ensure_unitary, ComplexMatrix, QcoreError, Result};

const UNITARY_TOL: f64 = 1e-8;

/// `U = e^{i alpha} Rz(beta) Ry(gamma) Rz(delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZyzDecomposition {
    pub global_phase: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl ZyzDecomposition {
    pub fn to_matrix(&self) -> ComplexMatrix {
        rotation_z(self.beta)
            * rotation_y(self.gamma)
            * rotation_z(self.delta)
            * c(0.0, self.global_phase).exp()
    }
}

/// `Ry(theta) = [[cos(theta/2), -sin(theta/2)], [sin(theta/2), cos(theta/2)]]`.
pub fn rotation_y(theta: f64) -> ComplexMatrix {
    let (s, co) = (theta / 2.0).sin_cos();
    ComplexMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

/// `Rz(phi) = diag(e^{-i phi/2}, e^{i phi/2})`.
pub fn rotation_z(phi: f64) -> ComplexMatrix {
    ComplexMatrix::from_row_slice(
        2,
        2,
        &[
            c(0.0, -phi / 2.0).exp(),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, phi / 2.0).exp(),
        ],
    )
}

fn wrap(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    if a.abs() < 1e-15 {
        0.0
    } else {
        a
    }
}

pub fn zyz_decompose(u: &ComplexMatrix) -> Result<ZyzDecomposition> {
    if u.nrows() != 2 || u.ncols() != 2 {
        return Err(QcoreError::DimensionMismatch {
            expected: 2,
            found: u.nrows().max(u.ncols()),
        });
    }
    ensure_unitary(u, UNITARY_TOL)?;

    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let global_phase = det.arg() / 2.0;
    // V = e^{-i alpha} U is in SU(2): V = [[a, -b*], [b, a*]].
    let v = u * c(0.0, -global_phase).exp();
    let (a, b) = (v[(0, 0)], v[(1, 0)]);
    let gamma = 2.0 * b.norm().atan2(a.norm());

    // arg(a) = -(beta + delta)/2, arg(b) = (beta - delta)/2.
    let (sum, diff) = if b.norm() < 1e-12 {
        (-2.0 * a.arg(), 0.0)
    } else if a.norm() < 1e-12 {
        (0.0, 2.0 * b.arg())
    } else {
        (-2.0 * a.arg(), 2.0 * b.arg())
    };
    let beta = (sum + diff) / 2.0;
    let delta = (sum - diff) / 2.0;

    Ok(ZyzDecomposition {
        global_phase: wrap(global_phase),
        beta: wrap(beta),
        gamma: wrap(gamma),
        delta: wrap(delta),
    }
    .fix_branch(u))
}

impl ZyzDecomposition {
    /// Wrapping individual angles into (-pi, pi] can flip the overall sign;
    /// absorb that sign into the global phase.
    fn fix_branch(mut self, u: &ComplexMatrix) -> Self {
        let m = self.to_matrix();
        let mut best = super::max_abs(&(&m - u));
        let flipped = ZyzDecomposition {
            global_phase: wrap(self.global_phase + PI),
            ..self
        };
        let alt = super::max_abs(&(flipped.to_matrix() - u));
        if alt < best {
            best = alt;
            self = flipped;
        }
        debug_assert!(best < 1e-6);
        self
    }
}
