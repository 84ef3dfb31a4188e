use serde::{Deserialize, Serialize};

use super::gate::{Gate, GateKind};
use super::state::{StateVector, MAX_QUBITS};
use crate::error::{Error, Result};

/// Where a gate angle comes from when the circuit is run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    Fixed(f64),
    /// Index into the data-feature vector.
    Data(usize),
    /// Index into the trainable-parameter vector.
    Theta(usize),
}

impl Angle {
    #[inline]
    fn resolve(self, data: &[f64], theta: &[f64]) -> f64 {
        match self {
            Angle::Fixed(v) => v,
            Angle::Data(i) => data[i],
            Angle::Theta(i) => theta[i],
        }
    }
}

/// One gate slot of a [`CircuitSpec`] with unresolved angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub kind: GateKind,
    pub wires: Vec<usize>,
    pub angles: Vec<Angle>,
}

impl Instruction {
    pub fn new(kind: GateKind, wires: Vec<usize>, angles: Vec<Angle>) -> Result<Self> {
        if wires.len() != kind.num_wires() {
            return Err(Error::config(format!(
                "{kind:?} takes {} wires, got {}",
                kind.num_wires(),
                wires.len()
            )));
        }
        if angles.len() != kind.num_params() {
            return Err(Error::config(format!(
                "{kind:?} takes {} params, got {}",
                kind.num_params(),
                angles.len()
            )));
        }
        if wires.len() == 2 && wires[0] == wires[1] {
            return Err(Error::Index(format!("{kind:?} wires must be distinct")));
        }
        Ok(Self {
            kind,
            wires,
            angles,
        })
    }

    pub fn h(q: usize) -> Self {
        Self {
            kind: GateKind::H,
            wires: vec![q],
            angles: vec![],
        }
    }

    pub fn x(q: usize) -> Self {
        Self {
            kind: GateKind::X,
            wires: vec![q],
            angles: vec![],
        }
    }

    pub fn rx(q: usize, a: Angle) -> Self {
        Self {
            kind: GateKind::Rx,
            wires: vec![q],
            angles: vec![a],
        }
    }

    pub fn ry(q: usize, a: Angle) -> Self {
        Self {
            kind: GateKind::Ry,
            wires: vec![q],
            angles: vec![a],
        }
    }

    pub fn rz(q: usize, a: Angle) -> Self {
        Self {
            kind: GateKind::Rz,
            wires: vec![q],
            angles: vec![a],
        }
    }

    pub fn rot(q: usize, a: [Angle; 3]) -> Self {
        Self {
            kind: GateKind::Rot,
            wires: vec![q],
            angles: a.to_vec(),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            wires: vec![control, target],
            angles: vec![],
        }
    }

    pub fn crz(control: usize, target: usize, a: Angle) -> Self {
        Self {
            kind: GateKind::Crz,
            wires: vec![control, target],
            angles: vec![a],
        }
    }

    /// Resolves angle references. Bounds must already have been checked.
    #[inline]
    pub(crate) fn bind_unchecked(&self, data: &[f64], theta: &[f64]) -> Gate {
        let w = &self.wires;
        let a = |i: usize| self.angles[i].resolve(data, theta);
        match self.kind {
            GateKind::H => Gate::H(w[0]),
            GateKind::X => Gate::X(w[0]),
            GateKind::Rx => Gate::Rx(w[0], a(0)),
            GateKind::Ry => Gate::Ry(w[0], a(0)),
            GateKind::Rz => Gate::Rz(w[0], a(0)),
            GateKind::Rot => Gate::Rot(w[0], [a(0), a(1), a(2)]),
            GateKind::Cnot => Gate::Cnot {
                control: w[0],
                target: w[1],
            },
            GateKind::Crz => Gate::Crz {
                control: w[0],
                target: w[1],
                theta: a(0),
            },
        }
    }

    pub fn bind(&self, data: &[f64], theta: &[f64]) -> Result<Gate> {
        for angle in &self.angles {
            check_ref(*angle, data.len(), theta.len())?;
        }
        Ok(self.bind_unchecked(data, theta))
    }
}

fn check_ref(angle: Angle, data_len: usize, theta_len: usize) -> Result<()> {
    match angle {
        Angle::Data(i) if i >= data_len => Err(Error::Binding(format!(
            "data[{i}] referenced but only {data_len} features supplied"
        ))),
        Angle::Theta(i) if i >= theta_len => Err(Error::Binding(format!(
            "theta[{i}] referenced but only {theta_len} parameters supplied"
        ))),
        _ => Ok(()),
    }
}

/// Ordered gate list over a fixed register width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    num_qubits: usize,
    instructions: Vec<Instruction>,
}

impl CircuitSpec {
    pub fn new(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::config(format!(
                "num_qubits must be in 1..={MAX_QUBITS}, got {num_qubits}"
            )));
        }
        Ok(Self {
            num_qubits,
            instructions: Vec::new(),
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn push(&mut self, instr: Instruction) -> Result<()> {
        let checked = Instruction::new(instr.kind, instr.wires, instr.angles)?;
        if let Some(&w) = checked.wires.iter().find(|&&w| w >= self.num_qubits) {
            return Err(Error::Index(format!(
                "wire {w} out of range for {} qubits",
                self.num_qubits
            )));
        }
        self.instructions.push(checked);
        Ok(())
    }

    pub fn extend(&mut self, instrs: impl IntoIterator<Item = Instruction>) -> Result<()> {
        for i in instrs {
            self.push(i)?;
        }
        Ok(())
    }

    /// Smallest data length and theta length that resolve every reference.
    pub fn required_lengths(&self) -> (usize, usize) {
        let mut data = 0;
        let mut theta = 0;
        for a in self.instructions.iter().flat_map(|i| &i.angles) {
            match *a {
                Angle::Data(i) => data = data.max(i + 1),
                Angle::Theta(i) => theta = theta.max(i + 1),
                Angle::Fixed(_) => {}
            }
        }
        (data, theta)
    }

    pub fn check_bindings(&self, data: &[f64], theta: &[f64]) -> Result<()> {
        for a in self.instructions.iter().flat_map(|i| &i.angles) {
            check_ref(*a, data.len(), theta.len())?;
        }
        Ok(())
    }

    /// Runs the circuit on `|0…0⟩`.
    pub fn run(&self, data: &[f64], theta: &[f64]) -> Result<StateVector> {
        self.check_bindings(data, theta)?;
        let mut state = StateVector::zero(self.num_qubits)?;
        self.apply_range(&mut state, 0, data, theta);
        Ok(state)
    }

    /// Applies instructions `start..` to `state`. Bindings must already be checked.
    pub(crate) fn apply_range(&self, state: &mut StateVector, start: usize, data: &[f64], theta: &[f64]) {
        for instr in &self.instructions[start..] {
            state.apply_unchecked(&instr.bind_unchecked(data, theta));
        }
    }

    /// Per-qubit Z expectations after running the circuit.
    pub fn expectations(&self, data: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(data, theta)?.all_z_expectations())
    }
}

/// Runs `spec` on `|0…0⟩` with `data` and `theta` substituted into its references.
pub fn run_circuit(spec: &CircuitSpec, data: &[f64], theta: &[f64]) -> Result<StateVector> {
    spec.run(data, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn empty_circuit_is_identity() {
        let spec = CircuitSpec::new(3).unwrap();
        let s = spec.run(&[], &[]).unwrap();
        assert_eq!(s, StateVector::zero(3).unwrap());
    }

    #[test]
    fn rz_of_zero_leaves_plus_state() {
        let mut spec = CircuitSpec::new(1).unwrap();
        spec.push(Instruction::h(0)).unwrap();
        spec.push(Instruction::rz(0, Angle::Data(0))).unwrap();
        let s = spec.run(&[0.0], &[]).unwrap();
        for a in s.amplitudes() {
            assert!((a.re - FRAC_1_SQRT_2).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn unresolved_reference_is_binding_error() {
        let mut spec = CircuitSpec::new(2).unwrap();
        spec.push(Instruction::ry(0, Angle::Theta(3))).unwrap();
        assert!(matches!(spec.run(&[], &[0.0; 3]), Err(Error::Binding(_))));
        assert!(spec.run(&[], &[0.0; 4]).is_ok());
        assert_eq!(spec.required_lengths(), (0, 4));
    }

    #[test]
    fn push_validates_arity_and_wires() {
        let mut spec = CircuitSpec::new(2).unwrap();
        assert!(matches!(spec.push(Instruction::h(2)), Err(Error::Index(_))));
        let bad = Instruction {
            kind: GateKind::Rot,
            wires: vec![0],
            angles: vec![Angle::Fixed(0.0)],
        };
        assert!(matches!(spec.push(bad), Err(Error::Config(_))));
        assert!(matches!(spec.push(Instruction::crz(1, 1, Angle::Fixed(0.0))), Err(Error::Index(_))));
    }
}
