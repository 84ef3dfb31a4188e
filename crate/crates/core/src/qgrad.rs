//! Jacobians of per-qubit Z expectations with respect to trainable angles.
//!
//! Single-qubit rotations use the two-term shift rule at `±π/2`. `CRZ` has
//! generator eigenvalues `{0, ±1/2}` and needs the four-term rule at `±π/2`
//! and `±3π/2`. A central finite-difference routine is provided as an
//! independent check.

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qsim::{Angle, CircuitSpec, GateKind, StateVector};

/// Prefix states are cached only while they fit in this many bytes.
const PREFIX_CACHE_BYTES: usize = 256 << 20;

/// A circuit with its data features pinned, viewed as a function of theta.
#[derive(Debug, Clone, Copy)]
pub struct ExpectationFn<'a> {
    pub circuit: &'a CircuitSpec,
    pub data: &'a [f64],
}

impl<'a> ExpectationFn<'a> {
    pub fn new(circuit: &'a CircuitSpec, data: &'a [f64]) -> Self {
        Self { circuit, data }
    }

    pub fn num_outputs(&self) -> usize {
        self.circuit.num_qubits()
    }

    pub fn eval(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.circuit.expectations(self.data, theta)
    }
}

/// Dense `num_outputs × num_params` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    num_outputs: usize,
    num_params: usize,
    values: Vec<f64>,
}

impl Jacobian {
    pub fn zeros(num_outputs: usize, num_params: usize) -> Self {
        Self {
            num_outputs,
            num_params,
            values: vec![0.0; num_outputs * num_params],
        }
    }

    fn from_columns(num_outputs: usize, columns: Vec<Vec<f64>>) -> Self {
        let mut jac = Self::zeros(num_outputs, columns.len());
        for (p, col) in columns.into_iter().enumerate() {
            for (o, v) in col.into_iter().enumerate() {
                jac.values[o * jac.num_params + p] = v;
            }
        }
        jac
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn get(&self, output: usize, param: usize) -> f64 {
        self.values[output * self.num_params + param]
    }

    pub fn row(&self, output: usize) -> &[f64] {
        &self.values[output * self.num_params..(output + 1) * self.num_params]
    }

    /// `Jᵀ·upstream`: the parameter gradient of `upstream · f(θ)`.
    pub fn vjp(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.num_outputs {
            return Err(Error::shape(format!(
                "upstream has {} entries, jacobian has {} outputs",
                upstream.len(),
                self.num_outputs
            )));
        }
        let mut out = vec![0.0; self.num_params];
        for (o, &u) in upstream.iter().enumerate() {
            for (acc, &j) in out.iter_mut().zip(self.row(o)) {
                *acc += u * j;
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Jacobian) -> f64 {
        assert_eq!(
            (self.num_outputs, self.num_params),
            (other.num_outputs, other.num_params)
        );
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftRule {
    TwoTerm,
    FourTerm,
}

impl ShiftRule {
    /// `(shift, coefficient)` pairs; the derivative is
    /// `Σ c·[f(θ+s) − f(θ−s)]`.
    pub fn terms(self) -> &'static [(f64, f64)] {
        const TWO: [(f64, f64); 1] = [(FRAC_PI_2, 0.5)];
        const FOUR: [(f64, f64); 2] = [
            (FRAC_PI_2, (SQRT_2 + 1.0) / (4.0 * SQRT_2)),
            (3.0 * FRAC_PI_2, -(SQRT_2 - 1.0) / (4.0 * SQRT_2)),
        ];
        match self {
            ShiftRule::TwoTerm => &TWO,
            ShiftRule::FourTerm => &FOUR,
        }
    }

    pub fn evaluations(self) -> usize {
        2 * self.terms().len()
    }
}

/// Where a trainable parameter enters the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSite {
    pub instruction: usize,
    pub rule: ShiftRule,
}

/// Maps each of `num_params` parameters to the single gate it feeds. Parameters
/// that feed no gate map to `None`.
pub fn shift_plan(circuit: &CircuitSpec, num_params: usize) -> Result<Vec<Option<ParamSite>>> {
    let mut plan: Vec<Option<ParamSite>> = vec![None; num_params];
    for (idx, instr) in circuit.instructions().iter().enumerate() {
        for angle in &instr.angles {
            let Angle::Theta(p) = *angle else { continue };
            if p >= num_params {
                return Err(Error::Binding(format!(
                    "theta[{p}] referenced but only {num_params} parameters supplied"
                )));
            }
            let rule = match instr.kind {
                GateKind::Rx | GateKind::Ry | GateKind::Rz => ShiftRule::TwoTerm,
                GateKind::Crz => ShiftRule::FourTerm,
                other => {
                    return Err(Error::UnsupportedBinding(format!(
                        "theta[{p}] drives a {other:?} gate; only RX/RY/RZ/CRZ are differentiable"
                    )))
                }
            };
            if plan[p].is_some() {
                return Err(Error::UnsupportedBinding(format!(
                    "theta[{p}] is shared by more than one gate"
                )));
            }
            plan[p] = Some(ParamSite {
                instruction: idx,
                rule,
            });
        }
    }
    Ok(plan)
}

/// Parameter-shift Jacobian of `f` at `theta`.
///
/// States just before each parameterised gate are computed once and every
/// shifted evaluation replays only the remaining suffix of the circuit.
pub fn shift_rule_grad(f: &ExpectationFn<'_>, theta: &[f64]) -> Result<Jacobian> {
    let circuit = f.circuit;
    circuit.check_bindings(f.data, theta)?;
    let plan = shift_plan(circuit, theta.len())?;

    let sites: Vec<usize> = {
        let mut s: Vec<usize> = plan.iter().flatten().map(|site| site.instruction).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let state_bytes = (1usize << circuit.num_qubits()) * std::mem::size_of::<num_complex::Complex64>();
    let prefixes = if sites.len() * state_bytes <= PREFIX_CACHE_BYTES {
        let mut cache = Vec::with_capacity(sites.len());
        let mut state = StateVector::zero(circuit.num_qubits())?;
        let mut cursor = 0;
        for &site in &sites {
            apply_slice(circuit, &mut state, cursor, site, f.data, theta);
            cursor = site;
            cache.push(state.clone());
        }
        Some(cache)
    } else {
        None
    };

    let column = |p: usize| -> Result<Vec<f64>> {
        let Some(site) = plan[p] else {
            return Ok(vec![0.0; f.num_outputs()]);
        };
        let start = match &prefixes {
            Some(cache) => {
                let k = sites.binary_search(&site.instruction).expect("site cached");
                cache[k].clone()
            }
            None => {
                let mut s = StateVector::zero(circuit.num_qubits())?;
                apply_slice(circuit, &mut s, 0, site.instruction, f.data, theta);
                s
            }
        };
        let mut col = vec![0.0; f.num_outputs()];
        let mut shifted = theta.to_vec();
        for &(shift, coeff) in site.rule.terms() {
            for sign in [1.0, -1.0] {
                shifted[p] = theta[p] + sign * shift;
                let mut s = start.clone();
                circuit.apply_range(&mut s, site.instruction, f.data, &shifted);
                for (c, z) in col.iter_mut().zip(s.all_z_expectations()) {
                    *c += sign * coeff * z;
                }
            }
        }
        Ok(col)
    };

    let columns = (0..theta.len())
        .into_par_iter()
        .map(column)
        .collect::<Result<Vec<_>>>()?;
    Ok(Jacobian::from_columns(f.num_outputs(), columns))
}

fn apply_slice(
    circuit: &CircuitSpec,
    state: &mut StateVector,
    from: usize,
    to: usize,
    data: &[f64],
    theta: &[f64],
) {
    for instr in &circuit.instructions()[from..to] {
        state.apply_unchecked(&instr.bind_unchecked(data, theta));
    }
}

/// Central finite differences with step `step`.
pub fn finite_diff_grad(f: &ExpectationFn<'_>, theta: &[f64], step: f64) -> Result<Jacobian> {
    if step.is_nan() || step <= 0.0 {
        return Err(Error::config(format!("finite-difference step must be > 0, got {step}")));
    }
    let columns = (0..theta.len())
        .map(|p| {
            let mut t = theta.to_vec();
            t[p] = theta[p] + step;
            let plus = f.eval(&t)?;
            t[p] = theta[p] - step;
            let minus = f.eval(&t)?;
            Ok(plus
                .iter()
                .zip(&minus)
                .map(|(a, b)| (a - b) / (2.0 * step))
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Jacobian::from_columns(f.num_outputs(), columns))
}

/// Extra circuit executions the shift rules need for one gradient.
pub fn shift_eval_count(num_params_single: usize, num_params_crz: usize) -> usize {
    ShiftRule::TwoTerm.evaluations() * num_params_single
        + ShiftRule::FourTerm.evaluations() * num_params_crz
}
