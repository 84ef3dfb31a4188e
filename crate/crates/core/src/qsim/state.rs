use num_complex::Complex64;

use super::gate::{rot_matrix, rx_matrix, rz_phases, Gate, Mat2};
use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 20;

/// Dense statevector over `num_qubits` qubits.
///
/// Qubit 0 is the most significant bit of the basis index, so `|01⟩` is
/// amplitude index 1 and has qubit 1 set.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩` on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if !(1..=MAX_QUBITS).contains(&num_qubits) {
            return Err(Error::config(format!(
                "num_qubits must be in 1..={MAX_QUBITS}, got {num_qubits}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; the norm is not checked.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_QUBITS {
            return Err(Error::shape(format!(
                "amplitude count {len} is not 2^n for n in 1..={MAX_QUBITS}"
            )));
        }
        Ok(Self {
            num_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_wires(&self, gate: &Gate) -> Result<()> {
        let wires = gate.wires();
        for &w in &wires {
            if w >= self.num_qubits {
                return Err(Error::Index(format!(
                    "wire {w} out of range for {} qubits in {gate:?}",
                    self.num_qubits
                )));
            }
        }
        if wires.len() == 2 && wires[0] == wires[1] {
            return Err(Error::Index(format!("repeated wire in {gate:?}")));
        }
        Ok(())
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        self.check_wires(gate)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    /// Applies a gate whose wires are already known to be valid for this state.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::H(q) => {
                let f = std::f64::consts::FRAC_1_SQRT_2;
                self.for_pairs(q, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = (x + y) * f;
                    *b = (x - y) * f;
                });
            }
            Gate::X(q) => self.for_pairs(q, std::mem::swap),
            Gate::Rx(q, theta) => self.apply_mat2(q, &rx_matrix(theta)),
            Gate::Ry(q, theta) => {
                let (s, c) = (0.5 * theta).sin_cos();
                self.for_pairs(q, |a, b| {
                    let (x, y) = (*a, *b);
                    *a = x * c - y * s;
                    *b = x * s + y * c;
                });
            }
            Gate::Rz(q, theta) => {
                let (e0, e1) = rz_phases(theta);
                self.for_pairs(q, |a, b| {
                    *a *= e0;
                    *b *= e1;
                });
            }
            Gate::Rot(q, angles) => self.apply_mat2(q, &rot_matrix(angles)),
            Gate::Cnot { control, target } => {
                let cm = self.mask(control);
                let tm = self.mask(target);
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
            Gate::Crz {
                control,
                target,
                theta,
            } => {
                let (e0, e1) = rz_phases(theta);
                let cm = self.mask(control);
                let tm = self.mask(target);
                for (i, a) in self.amps.iter_mut().enumerate() {
                    if i & cm != 0 {
                        *a *= if i & tm == 0 { e0 } else { e1 };
                    }
                }
            }
        }
    }

    fn apply_mat2(&mut self, q: usize, m: &Mat2) {
        let [[m00, m01], [m10, m11]] = *m;
        self.for_pairs(q, |a, b| {
            let (x, y) = (*a, *b);
            *a = m00 * x + m01 * y;
            *b = m10 * x + m11 * y;
        });
    }

    /// Visits every amplitude pair that differs only in `qubit` (bit clear, bit set).
    #[inline]
    fn for_pairs(&mut self, qubit: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let m = self.mask(qubit);
        for chunk in self.amps.chunks_exact_mut(2 * m) {
            let (lo, hi) = chunk.split_at_mut(m);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                f(a, b);
            }
        }
    }

    /// `⟨ψ|Z_q|ψ⟩`.
    pub fn z_expectation(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::Index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.num_qubits
            )));
        }
        let m = self.mask(qubit);
        let mut acc = 0.0;
        for chunk in self.amps.chunks_exact(2 * m) {
            let (lo, hi) = chunk.split_at(m);
            acc += lo.iter().map(|a| a.norm_sqr()).sum::<f64>();
            acc -= hi.iter().map(|a| a.norm_sqr()).sum::<f64>();
        }
        Ok(acc)
    }

    /// Z expectations of every qubit, qubit 0 first.
    pub fn all_z_expectations(&self) -> Vec<f64> {
        let n = self.num_qubits;
        let mut out = vec![0.0; n];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, slot) in out.iter_mut().enumerate() {
                if i & (1 << (n - 1 - q)) == 0 {
                    *slot += p;
                } else {
                    *slot -= p;
                }
            }
        }
        out
    }
}

/// `|0…0⟩` on `num_qubits` qubits.
pub fn init_zero_state(num_qubits: usize) -> Result<StateVector> {
    StateVector::zero(num_qubits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, PI};

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    #[test]
    fn zero_state_layout() {
        let s = StateVector::zero(1).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let s = StateVector::zero(4).unwrap();
        assert_eq!(s.amplitudes().len(), 16);
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm_sqr() == 0.0));
    }

    #[test]
    fn zero_state_rejects_out_of_range() {
        assert!(matches!(StateVector::zero(0), Err(Error::Config(_))));
        assert!(matches!(StateVector::zero(21), Err(Error::Config(_))));
    }

    #[test]
    fn hadamard_and_ry_on_zero() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply(&Gate::H(0)).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[1], FRAC_1_SQRT_2, 0.0));

        let mut s = StateVector::zero(1).unwrap();
        s.apply(&Gate::Ry(0, PI)).unwrap();
        assert!(close(s.amplitudes()[0], 0.0, 0.0));
        assert!(close(s.amplitudes()[1], 1.0, 0.0));
    }

    #[test]
    fn crz_with_control_clear_is_identity() {
        for theta in [0.3, 1.7, -2.2] {
            let mut s = StateVector::zero(2).unwrap();
            s.apply(&Gate::Crz { control: 0, target: 1, theta }).unwrap();
            assert_eq!(s, StateVector::zero(2).unwrap());
        }
    }

    #[test]
    fn invalid_wires_are_index_errors() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(matches!(s.apply(&Gate::H(2)), Err(Error::Index(_))));
        assert!(matches!(
            s.apply(&Gate::Cnot { control: 1, target: 1 }),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn z_expectation_examples() {
        let s = StateVector::zero(1).unwrap();
        assert_eq!(s.z_expectation(0).unwrap(), 1.0);

        let mut s = StateVector::zero(1).unwrap();
        s.apply(&Gate::H(0)).unwrap();
        assert!(s.z_expectation(0).unwrap().abs() < 1e-12);

        let mut s = StateVector::zero(1).unwrap();
        s.apply(&Gate::Ry(0, FRAC_PI_3)).unwrap();
        assert!((s.z_expectation(0).unwrap() - 0.5).abs() < 1e-12);

        assert!(matches!(s.z_expectation(1), Err(Error::Index(_))));
    }

    #[test]
    fn all_z_uses_msb_ordering() {
        // |01⟩: qubit 0 clear, qubit 1 set.
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&Gate::X(1)).unwrap();
        assert_eq!(s.amplitudes()[1], Complex64::new(1.0, 0.0));
        assert_eq!(s.all_z_expectations(), vec![1.0, -1.0]);

        let mut s = StateVector::zero(2).unwrap();
        s.apply(&Gate::H(0)).unwrap();
        s.apply(&Gate::H(1)).unwrap();
        assert!(s.all_z_expectations().iter().all(|z| z.abs() < 1e-12));
    }

    #[test]
    fn rot_inverse_restores_state() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply(&Gate::H(0)).unwrap();
        let before = s.clone();
        let g = Gate::Rot(0, [0.4, -1.1, 2.5]);
        s.apply(&g).unwrap();
        s.apply(&g.inverse()).unwrap();
        for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn from_amplitudes_requires_power_of_two() {
        assert!(StateVector::from_amplitudes(vec![Complex64::new(1.0, 0.0); 3]).is_err());
        let s = StateVector::from_amplitudes(vec![Complex64::new(0.5, 0.0); 4]).unwrap();
        assert_eq!(s.num_qubits(), 2);
    }
}
