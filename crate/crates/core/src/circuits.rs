//! Encoding circuits, the CRZ+RY parametric layer and QNN assembly.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{Angle, CircuitSpec, Instruction};

/// How classical features are written into rotation angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderKind {
    /// `H` then `RZ(x_q)` on each qubit.
    AngleOneToOne,
    /// `H` then `RZ, RX, RZ, RX` carrying four features per qubit.
    AngleFourToOne,
}

impl EncoderKind {
    pub fn features_per_qubit(self) -> usize {
        match self {
            EncoderKind::AngleOneToOne => 1,
            EncoderKind::AngleFourToOne => 4,
        }
    }
}

/// Encoder fragment for `num_qubits` qubits. Feature `t` lands on qubit
/// `t / features_per_qubit`.
pub fn build_encoder(kind: EncoderKind, num_qubits: usize) -> Vec<Instruction> {
    let mut out = Vec::with_capacity(num_qubits * (1 + kind.features_per_qubit()));
    for q in 0..num_qubits {
        out.push(Instruction::h(q));
        match kind {
            EncoderKind::AngleOneToOne => out.push(Instruction::rz(q, Angle::Data(q))),
            EncoderKind::AngleFourToOne => {
                let base = 4 * q;
                out.push(Instruction::rz(q, Angle::Data(base)));
                out.push(Instruction::rx(q, Angle::Data(base + 1)));
                out.push(Instruction::rz(q, Angle::Data(base + 2)));
                out.push(Instruction::rx(q, Angle::Data(base + 3)));
            }
        }
    }
    out
}

/// One parametric layer: a ring of `CRZ(q → q+1 mod n)` followed by `RY` on
/// every qubit. Consumes parameter slots `2n·layer_index .. 2n·(layer_index+1)`,
/// CRZ angles first.
pub fn build_parametric_layer(num_qubits: usize, layer_index: usize) -> Result<Vec<Instruction>> {
    if num_qubits < 2 {
        return Err(Error::config(format!(
            "parametric layer needs at least 2 qubits, got {num_qubits}"
        )));
    }
    let offset = layer_index * 2 * num_qubits;
    let ring = (0..num_qubits)
        .map(|q| Instruction::crz(q, (q + 1) % num_qubits, Angle::Theta(offset + q)));
    let rotations =
        (0..num_qubits).map(|q| Instruction::ry(q, Angle::Theta(offset + num_qubits + q)));
    Ok(ring.chain(rotations).collect())
}

/// Encoder + `num_layers` parametric layers + all-qubit Z readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QnnSpec {
    pub num_qubits: usize,
    pub encoder: EncoderKind,
    pub num_layers: usize,
}

impl QnnSpec {
    pub fn new(num_qubits: usize, encoder: EncoderKind, num_layers: usize) -> Result<Self> {
        let spec = Self {
            num_qubits,
            encoder,
            num_layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::config("a QNN needs at least one parametric layer"));
        }
        if self.num_qubits < 2 {
            return Err(Error::config(format!(
                "a QNN needs at least 2 qubits, got {}",
                self.num_qubits
            )));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.num_layers * 2 * self.num_qubits
    }

    pub fn num_features(&self) -> usize {
        self.num_qubits * self.encoder.features_per_qubit()
    }

    /// Trainable parameters split as (single-qubit rotations, CRZ).
    pub fn param_kinds(&self) -> (usize, usize) {
        let per_kind = self.num_layers * self.num_qubits;
        (per_kind, per_kind)
    }

    pub fn build(&self) -> Result<CircuitSpec> {
        self.validate()?;
        let mut circuit = CircuitSpec::new(self.num_qubits)?;
        circuit.extend(build_encoder(self.encoder, self.num_qubits))?;
        for layer in 0..self.num_layers {
            circuit.extend(build_parametric_layer(self.num_qubits, layer)?)?;
        }
        Ok(circuit)
    }

    /// Uniform draws in `(-π, π)`.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.num_params()).map(|_| rng.gen_range(-PI..PI)).collect()
    }
}

/// Maps `[lo, hi]` linearly onto `[0, 2π]`, clamping values outside the range.
pub fn scale_features(x: &[f64], lo: f64, hi: f64) -> Result<Vec<f64>> {
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::config(format!("scale range needs hi > lo, got [{lo}, {hi}]")));
    }
    Ok(x.iter().map(|&v| scale_one(v, lo, hi)).collect())
}

#[inline]
fn scale_one(v: f64, lo: f64, hi: f64) -> f64 {
    ((v - lo) / (hi - lo) * TAU).clamp(0.0, TAU)
}

/// Per-feature min-max bounds fitted on a training split and reused (with
/// clamping) on any other split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::config("cannot fit a scaler on zero rows"))?;
        let dim = first.len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::shape(format!(
                    "feature rows have mixed widths {dim} and {}",
                    row.len()
                )));
            }
            for ((l, h), &v) in lo.iter_mut().zip(hi.iter_mut()).zip(row) {
                *l = l.min(v);
                *h = h.max(v);
            }
        }
        // a constant feature maps to 0
        for (l, h) in lo.iter().zip(hi.iter_mut()) {
            if *h <= *l {
                *h = *l + 1.0;
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn transform(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(Error::shape(format!(
                "scaler fitted on {} features, got {}",
                self.dim(),
                row.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&l, &h))| scale_one(v, l, h))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::GateKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn encoder_structure() {
        let one = build_encoder(EncoderKind::AngleOneToOne, 3);
        assert_eq!(one.len(), 6);
        let data_refs = |v: &[Instruction]| {
            v.iter()
                .flat_map(|i| &i.angles)
                .filter(|a| matches!(a, Angle::Data(_)))
                .count()
        };
        assert_eq!(data_refs(&one), 3);

        let four = build_encoder(EncoderKind::AngleFourToOne, 4);
        assert_eq!(four.len(), 20);
        assert_eq!(data_refs(&four), 16);
        let kinds: Vec<_> = four[5..10].iter().map(|i| i.kind).collect();
        assert_eq!(
            kinds,
            vec![GateKind::H, GateKind::Rz, GateKind::Rx, GateKind::Rz, GateKind::Rx]
        );
        assert_eq!(four[6].angles, vec![Angle::Data(4)]);
        assert_eq!(four[9].angles, vec![Angle::Data(7)]);
    }

    #[test]
    fn four_to_one_zero_data_is_plus_state() {
        let mut c = CircuitSpec::new(1).unwrap();
        c.extend(build_encoder(EncoderKind::AngleFourToOne, 1)).unwrap();
        let s = c.run(&[0.0; 4], &[]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for a in s.amplitudes() {
            assert!((a.re - h).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn parametric_layer_layout() {
        let layer = build_parametric_layer(4, 0).unwrap();
        assert_eq!(layer.len(), 8);
        assert_eq!(layer.iter().filter(|i| i.kind == GateKind::Crz).count(), 4);
        assert_eq!(layer.iter().filter(|i| i.kind == GateKind::Ry).count(), 4);
        assert_eq!(layer[3].wires, vec![3, 0]);

        let second = build_parametric_layer(4, 2).unwrap();
        assert_eq!(second[0].angles, vec![Angle::Theta(16)]);
        assert_eq!(second[7].angles, vec![Angle::Theta(23)]);

        assert!(matches!(build_parametric_layer(1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn zero_theta_layer_is_identity_up_to_phase() {
        let mut c = CircuitSpec::new(2).unwrap();
        c.push(Instruction::ry(0, Angle::Fixed(0.7))).unwrap();
        c.push(Instruction::rx(1, Angle::Fixed(-1.3))).unwrap();
        let before = c.run(&[], &[]).unwrap();
        c.extend(build_parametric_layer(2, 0).unwrap()).unwrap();
        let after = c.run(&[], &[0.0; 4]).unwrap();
        for (a, b) in before.amplitudes().iter().zip(after.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn qnn_parameter_counts() {
        let q = QnnSpec::new(10, EncoderKind::AngleOneToOne, 3).unwrap();
        assert_eq!(q.num_params(), 60);
        let q = QnnSpec::new(5, EncoderKind::AngleOneToOne, 6).unwrap();
        assert_eq!(q.num_params(), 60);
        let q = QnnSpec::new(4, EncoderKind::AngleFourToOne, 3).unwrap();
        assert_eq!(q.num_params(), 24);
        let c = q.build().unwrap();
        assert_eq!(c.required_lengths(), (16, 24));
        assert_eq!(q.param_kinds(), (12, 12));
        assert!(QnnSpec::new(4, EncoderKind::AngleOneToOne, 0).is_err());
    }

    #[test]
    fn init_params_in_open_range() {
        let q = QnnSpec::new(4, EncoderKind::AngleFourToOne, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = q.init_params(&mut rng);
        assert_eq!(p.len(), 24);
        assert!(p.iter().all(|v| v.abs() < PI));
    }

    #[test]
    fn scaling_examples() {
        let s = scale_features(&[0.5, 0.0, 1.0, 1.2, -0.3], 0.0, 1.0).unwrap();
        assert!((s[0] - PI).abs() < 1e-15);
        assert_eq!(s[1], 0.0);
        assert!((s[2] - TAU).abs() < 1e-15);
        assert_eq!(s[3], TAU);
        assert_eq!(s[4], 0.0);
        assert!(matches!(scale_features(&[0.1], 1.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn minmax_scaler_fits_training_bounds() {
        let rows = vec![vec![0.0, 5.0], vec![2.0, 5.0], vec![1.0, 5.0]];
        let sc = MinMaxScaler::fit(&rows).unwrap();
        let t = sc.transform(&[1.0, 5.0]).unwrap();
        assert!((t[0] - PI).abs() < 1e-12);
        assert_eq!(t[1], 0.0);
        assert_eq!(sc.transform(&[3.0, 5.0]).unwrap()[0], TAU);
        assert!(sc.transform(&[1.0]).is_err());
    }
}
