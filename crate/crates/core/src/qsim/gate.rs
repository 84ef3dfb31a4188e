use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Gate families understood by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    X,
    Rx,
    Ry,
    Rz,
    Rot,
    Cnot,
    Crz,
}

impl GateKind {
    pub fn num_wires(self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Crz => 2,
            _ => 1,
        }
    }

    pub fn num_params(self) -> usize {
        match self {
            GateKind::H | GateKind::X | GateKind::Cnot => 0,
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Crz => 1,
            GateKind::Rot => 3,
        }
    }
}

/// A fully bound gate: wires and angles (radians) are concrete.
///
/// Conventions: `Rx(θ) = exp(-iθX/2)`, `Ry(θ) = exp(-iθY/2)`,
/// `Rz(θ) = diag(e^{-iθ/2}, e^{iθ/2})`, `Crz` applies `Rz` to `target` when
/// `control` is set, and `Rot([α, β, γ]) = Rz(γ)·Ry(β)·Rz(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    Rot(usize, [f64; 3]),
    Cnot { control: usize, target: usize },
    Crz { control: usize, target: usize, theta: f64 },
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::X(_) => GateKind::X,
            Gate::Rx(..) => GateKind::Rx,
            Gate::Ry(..) => GateKind::Ry,
            Gate::Rz(..) => GateKind::Rz,
            Gate::Rot(..) => GateKind::Rot,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Crz { .. } => GateKind::Crz,
        }
    }

    /// Qubits the gate acts on; for controlled gates the control comes first.
    pub fn wires(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Rot(q, _) => vec![q],
            Gate::Cnot { control, target } | Gate::Crz { control, target, .. } => {
                vec![control, target]
            }
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::H(q) => Gate::H(q),
            Gate::X(q) => Gate::X(q),
            Gate::Rx(q, t) => Gate::Rx(q, -t),
            Gate::Ry(q, t) => Gate::Ry(q, -t),
            Gate::Rz(q, t) => Gate::Rz(q, -t),
            Gate::Rot(q, [a, b, c]) => Gate::Rot(q, [-c, -b, -a]),
            Gate::Cnot { control, target } => Gate::Cnot { control, target },
            Gate::Crz {
                control,
                target,
                theta,
            } => Gate::Crz {
                control,
                target,
                theta: -theta,
            },
        }
    }
}

pub(crate) type Mat2 = [[Complex64; 2]; 2];

pub(crate) fn rz_phases(theta: f64) -> (Complex64, Complex64) {
    let half = 0.5 * theta;
    (
        Complex64::from_polar(1.0, -half),
        Complex64::from_polar(1.0, half),
    )
}

pub(crate) fn rx_matrix(theta: f64) -> Mat2 {
    let (s, c) = (0.5 * theta).sin_cos();
    let c = Complex64::new(c, 0.0);
    let mis = Complex64::new(0.0, -s);
    [[c, mis], [mis, c]]
}

pub(crate) fn ry_matrix(theta: f64) -> Mat2 {
    let (s, c) = (0.5 * theta).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub(crate) fn rz_matrix(theta: f64) -> Mat2 {
    let (e0, e1) = rz_phases(theta);
    let zero = Complex64::new(0.0, 0.0);
    [[e0, zero], [zero, e1]]
}

pub(crate) fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub(crate) fn rot_matrix([alpha, beta, gamma]: [f64; 3]) -> Mat2 {
    matmul2(&rz_matrix(gamma), &matmul2(&ry_matrix(beta), &rz_matrix(alpha)))
}
