use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerSpec {
    Sgd {
        lr: f64,
    },
    Adagrad {
        lr: f64,
        eps: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        weight_decay: f64,
    },
}

impl OptimizerSpec {
    pub fn sgd(lr: f64) -> Self {
        OptimizerSpec::Sgd { lr }
    }

    pub fn adagrad(lr: f64) -> Self {
        OptimizerSpec::Adagrad { lr, eps: 1e-10 }
    }

    pub fn adam(lr: f64, weight_decay: f64) -> Self {
        OptimizerSpec::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }

    /// Parses `sgd`, `adagrad` or `adam` with the given learning rate.
    pub fn from_name(name: &str, lr: f64, weight_decay: f64) -> Result<Self> {
        let spec = match name.to_ascii_lowercase().as_str() {
            "sgd" => Self::sgd(lr),
            "adagrad" => Self::adagrad(lr),
            "adam" => Self::adam(lr, weight_decay),
            other => return Err(Error::config(format!("unknown optimizer '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerSpec::Sgd { lr } | OptimizerSpec::Adagrad { lr, .. } | OptimizerSpec::Adam { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lr().is_nan() || self.lr() <= 0.0 {
            return Err(Error::config(format!("learning rate must be > 0, got {}", self.lr())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GroupState {
    Empty,
    Adagrad { sum_sq: Vec<f64> },
    Adam { m: Vec<f64>, v: Vec<f64> },
}

/// An optimizer with its per-parameter-group state.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    spec: OptimizerSpec,
    state: Vec<GroupState>,
    steps: u64,
}

impl Optimizer {
    pub fn new(spec: OptimizerSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            state: Vec::new(),
            steps: 0,
        })
    }

    pub fn spec(&self) -> &OptimizerSpec {
        &self.spec
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Adagrad's squared-gradient accumulator for `group`, if any.
    pub fn accumulator(&self, group: usize) -> Option<&[f64]> {
        match self.state.get(group) {
            Some(GroupState::Adagrad { sum_sq }) => Some(sum_sq),
            _ => None,
        }
    }

    /// One update over every parameter group. Groups are matched to state by position.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(format!(
                "{} parameter groups but {} gradient groups",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::shape(format!(
                    "group {i}: {} parameters but {} gradients",
                    p.len(),
                    g.len()
                )));
            }
        }
        if self.state.len() < params.len() {
            self.state.resize(params.len(), GroupState::Empty);
        }
        self.steps += 1;
        let t = self.steps as i32;
        for ((p, g), st) in params.iter_mut().zip(grads).zip(self.state.iter_mut()) {
            match self.spec {
                OptimizerSpec::Sgd { lr } => {
                    for (x, d) in p.iter_mut().zip(g) {
                        *x -= lr * d;
                    }
                }
                OptimizerSpec::Adagrad { lr, eps } => {
                    if matches!(st, GroupState::Empty) {
                        *st = GroupState::Adagrad {
                            sum_sq: vec![0.0; p.len()],
                        };
                    }
                    let GroupState::Adagrad { sum_sq } = st else { unreachable!() };
                    for ((x, d), acc) in p.iter_mut().zip(g).zip(sum_sq.iter_mut()) {
                        *acc += d * d;
                        *x -= lr * d / (acc.sqrt() + eps);
                    }
                }
                OptimizerSpec::Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                    weight_decay,
                } => {
                    if matches!(st, GroupState::Empty) {
                        *st = GroupState::Adam {
                            m: vec![0.0; p.len()],
                            v: vec![0.0; p.len()],
                        };
                    }
                    let GroupState::Adam { m, v } = st else { unreachable!() };
                    let bc1 = 1.0 - beta1.powi(t);
                    let bc2 = 1.0 - beta2.powi(t);
                    for (((x, &d), mi), vi) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        let d = d + weight_decay * *x;
                        *mi = beta1 * *mi + (1.0 - beta1) * d;
                        *vi = beta2 * *vi + (1.0 - beta2) * d * d;
                        *x -= lr * (*mi / bc1) / ((*vi / bc2).sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_step(spec: OptimizerSpec, g: f64) -> f64 {
        let mut opt = Optimizer::new(spec).unwrap();
        let mut p = [1.0];
        opt.step(&mut [&mut p[..]], &[vec![g]]).unwrap();
        p[0] - 1.0
    }

    #[test]
    fn first_step_sizes() {
        assert_eq!(one_step(OptimizerSpec::sgd(0.5), 1.0), -0.5);
        assert!((one_step(OptimizerSpec::adagrad(0.5), 2.0) + 0.5).abs() < 1e-9);
        assert!((one_step(OptimizerSpec::adam(0.001, 0.0), 1.0) + 0.001).abs() < 1e-9);
    }

    #[test]
    fn adagrad_accumulator_grows() {
        let mut opt = Optimizer::new(OptimizerSpec::adagrad(0.1)).unwrap();
        let mut p = [0.0, 0.0];
        let mut prev = vec![0.0, 0.0];
        for g in [[1.0, -2.0], [0.0, 0.5], [-3.0, 0.0]] {
            opt.step(&mut [&mut p[..]], &[g.to_vec()]).unwrap();
            let acc = opt.accumulator(0).unwrap().to_vec();
            assert!(acc.iter().zip(&prev).all(|(a, b)| a >= b));
            prev = acc;
        }
    }

    #[test]
    fn rejects_bad_specs_and_shapes() {
        assert!(Optimizer::new(OptimizerSpec::sgd(0.0)).is_err());
        assert!(OptimizerSpec::from_name("rmsprop", 0.1, 0.0).is_err());
        let mut opt = Optimizer::new(OptimizerSpec::sgd(0.1)).unwrap();
        let mut p = [0.0; 2];
        assert!(opt.step(&mut [&mut p[..]], &[vec![1.0]]).is_err());
    }

    #[test]
    fn deterministic_given_state() {
        let run = || {
            let mut opt = Optimizer::new(OptimizerSpec::adam(0.01, 1e-5)).unwrap();
            let mut p = vec![0.3, -0.2];
            for k in 0..5 {
                let g = vec![0.1 * k as f64, -0.4];
                opt.step(&mut [&mut p[..]], &[g]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
