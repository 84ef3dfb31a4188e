//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use quanv::nn::{Layer, Tensor};
use quanv::qsim::Gate;
use rand::Rng;

pub type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mat2(a: [[Complex64; 2]; 2]) -> CMat {
    DMatrix::from_row_slice(2, 2, &[a[0][0], a[0][1], a[1][0], a[1][1]])
}

pub fn h() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    mat2([[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]])
}

pub fn x() -> CMat {
    mat2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]])
}

/// `exp(-iθP/2) = cos(θ/2)·I − i·sin(θ/2)·P`
fn pauli_rotation(p: &CMat, theta: f64) -> CMat {
    let id = CMat::identity(2, 2);
    id * c((theta / 2.0).cos(), 0.0) - p * c(0.0, (theta / 2.0).sin())
}

pub fn rx(t: f64) -> CMat {
    pauli_rotation(&x(), t)
}

pub fn ry(t: f64) -> CMat {
    let y = mat2([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]);
    pauli_rotation(&y, t)
}

pub fn rz(t: f64) -> CMat {
    let z = mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]);
    pauli_rotation(&z, t)
}

fn kron_all(ops: &[CMat]) -> CMat {
    ops.iter().skip(1).fold(ops[0].clone(), |acc, m| acc.kronecker(m))
}

/// Full `2^n × 2^n` operator with qubit 0 as the leftmost tensor factor.
fn embed(n: usize, parts: &[(usize, CMat)]) -> CMat {
    let ops: Vec<CMat> = (0..n)
        .map(|q| {
            parts
                .iter()
                .find(|(w, _)| *w == q)
                .map_or_else(|| CMat::identity(2, 2), |(_, m)| m.clone())
        })
        .collect();
    kron_all(&ops)
}

fn controlled(n: usize, control: usize, target: usize, u: CMat) -> CMat {
    let p0 = mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
    let p1 = mat2([[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
    embed(n, &[(control, p0)]) + embed(n, &[(control, p1), (target, u)])
}

pub fn gate_matrix(n: usize, g: &Gate) -> CMat {
    match *g {
        Gate::H(q) => embed(n, &[(q, h())]),
        Gate::X(q) => embed(n, &[(q, x())]),
        Gate::Rx(q, t) => embed(n, &[(q, rx(t))]),
        Gate::Ry(q, t) => embed(n, &[(q, ry(t))]),
        Gate::Rz(q, t) => embed(n, &[(q, rz(t))]),
        Gate::Rot(q, [a, b, g]) => embed(n, &[(q, rz(g) * ry(b) * rz(a))]),
        Gate::Cnot { control, target } => controlled(n, control, target, x()),
        Gate::Crz { control, target, theta } => controlled(n, control, target, rz(theta)),
    }
}

pub fn oracle_state(n: usize, gates: &[Gate]) -> DVector<Complex64> {
    let mut psi = DVector::from_element(1 << n, c(0.0, 0.0));
    psi[0] = c(1.0, 0.0);
    for g in gates {
        psi = gate_matrix(n, g) * psi;
    }
    psi
}

/// `⟨Z_q⟩` with qubit 0 as the most significant index bit.
pub fn oracle_z(n: usize, psi: &DVector<Complex64>, q: usize) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(i, a)| {
            let bit = (i >> (n - 1 - q)) & 1;
            let sign = if bit == 0 { 1.0 } else { -1.0 };
            sign * a.norm_sqr()
        })
        .sum()
}

pub fn random_gate<R: Rng>(rng: &mut R, n: usize) -> Gate {
    let q = rng.gen_range(0..n);
    let t = rng.gen_range(-std::f64::consts::TAU..std::f64::consts::TAU);
    let other = |rng: &mut R| {
        let mut o = rng.gen_range(0..n - 1);
        if o >= q {
            o += 1;
        }
        o
    };
    let kinds = if n > 1 { 8 } else { 6 };
    match rng.gen_range(0..kinds) {
        0 => Gate::H(q),
        1 => Gate::X(q),
        2 => Gate::Rx(q, t),
        3 => Gate::Ry(q, t),
        4 => Gate::Rz(q, t),
        5 => Gate::Rot(q, [t, rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]),
        6 => Gate::Cnot { control: q, target: other(rng) },
        _ => Gate::Crz { control: q, target: other(rng), theta: t },
    }
}

/// Central-difference check of one layer: input gradient and every
/// parameter gradient of `Σ w·layer(x)` for a fixed random `w`.
/// Returns the worst relative error.
pub fn layer_gradcheck<R: Rng>(layer: &Layer, input_shape: &[usize], step: f64, rng: &mut R) -> f64 {
    let n: usize = input_shape.iter().product();
    let x = Tensor::new(input_shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let (y, cache) = layer.forward(&x).unwrap();
    let w: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let upstream = Tensor::new(y.shape().to_vec(), w.clone()).unwrap();
    let (gx, gp) = layer.backward(&cache, &upstream).unwrap();
    let objective = |l: &Layer, x: &Tensor| -> f64 {
        l.forward(x).unwrap().0.data().iter().zip(&w).map(|(a, b)| a * b).sum()
    };
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-7);
    for i in 0..n {
        let mut xp = x.clone();
        xp.data_mut()[i] += step;
        let mut xm = x.clone();
        xm.data_mut()[i] -= step;
        let fd = (objective(layer, &xp) - objective(layer, &xm)) / (2.0 * step);
        worst = worst.max(rel(gx.data()[i], fd));
    }
    for (g, grads) in gp.iter().enumerate() {
        for (i, &analytic) in grads.iter().enumerate() {
            let mut lp = layer.clone();
            lp.params_mut()[g][i] += step;
            let mut lm = layer.clone();
            lm.params_mut()[g][i] -= step;
            let fd = (objective(&lp, &x) - objective(&lm, &x)) / (2.0 * step);
            worst = worst.max(rel(analytic, fd));
        }
    }
    worst
}

/// Random circuit with every rotation driven by its own fresh parameter.
/// Returns the circuit and the number of parameters it reads.
pub fn random_trainable_circuit<R: Rng>(rng: &mut R, n: usize, gates: usize) -> (quanv::qsim::CircuitSpec, usize) {
    use quanv::qsim::{Angle, CircuitSpec, Instruction};
    let mut c = CircuitSpec::new(n).unwrap();
    let mut p = 0;
    for _ in 0..gates {
        let q = rng.gen_range(0..n);
        let t = (q + rng.gen_range(1..n)) % n;
        let instr = match rng.gen_range(0..7) {
            0 => Instruction::h(q),
            1 => Instruction::cnot(q, t),
            2 => Instruction::rot(q, [Angle::Fixed(rng.gen_range(-3.0..3.0)), Angle::Fixed(0.3), Angle::Fixed(-1.1)]),
            k => {
                let a = Angle::Theta(p);
                p += 1;
                match k {
                    3 => Instruction::rx(q, a),
                    4 => Instruction::ry(q, a),
                    5 => Instruction::rz(q, a),
                    _ => Instruction::crz(q, t, a),
                }
            }
        };
        c.push(instr).unwrap();
    }
    (c, p)
}
