//! Quanvolution: a quantum circuit slid over an image as a filter.
//!
//! Each `k×k` window is flattened row-major, scaled from `[0, 1]` to
//! `[0, 2π]`, loaded with four-features-per-qubit angle encoding, pushed
//! through the parametric layers, and read out as one Z expectation per
//! qubit. Pixel `t` of the window drives qubit `t / 4`, rotation slot `t % 4`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{scale_features, EncoderKind, QnnSpec};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::qgrad::{shift_eval_count, shift_rule_grad, ExpectationFn};
use crate::qsim::CircuitSpec;

/// Number of window positions along each axis: `floor((n − k)/s) + 1`.
pub fn grid_size(height: usize, width: usize, kernel: usize, stride: usize) -> Result<(usize, usize)> {
    if kernel == 0 || stride == 0 {
        return Err(Error::config("kernel and stride must be positive"));
    }
    if height < kernel || width < kernel {
        return Err(Error::shape(format!(
            "{height}x{width} image is smaller than the {kernel}x{kernel} kernel"
        )));
    }
    Ok(((height - kernel) / stride + 1, (width - kernel) / stride + 1))
}

fn image_hw(image: &Tensor) -> Result<(usize, usize)> {
    match *image.shape() {
        [h, w] => Ok((h, w)),
        [1, h, w] => Ok((h, w)),
        _ => Err(Error::shape(format!(
            "quanvolution expects a single-channel image, got {:?}",
            image.shape()
        ))),
    }
}

/// Row-major list of flattened `k×k` windows. No padding; pixels that do not
/// fill a whole window are dropped.
pub fn extract_patches(image: &Tensor, kernel: usize, stride: usize) -> Result<Vec<Vec<f64>>> {
    let (h, w) = image_hw(image)?;
    let (gh, gw) = grid_size(h, w, kernel, stride)?;
    let px = image.data();
    let mut patches = Vec::with_capacity(gh * gw);
    for i in 0..gh {
        for j in 0..gw {
            let mut patch = Vec::with_capacity(kernel * kernel);
            for r in 0..kernel {
                let row = (i * stride + r) * w + j * stride;
                patch.extend_from_slice(&px[row..row + kernel]);
            }
            patches.push(patch);
        }
    }
    Ok(patches)
}

/// Output of a quanvolution: `height × width` grid, `channels` features per cell,
/// stored cell-major (`values[(i·width + j)·channels + c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.values[(i * self.width + j) * self.channels + c]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Quantum circuit used as a convolution filter.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumFilter {
    kernel: usize,
    stride: usize,
    qnn: QnnSpec,
    circuit: CircuitSpec,
    pub trainable: bool,
    pub theta: Vec<f64>,
}

impl QuantumFilter {
    /// Filter over `kernel×kernel` windows with `kernel²/4` qubits.
    pub fn new(kernel: usize, stride: usize, num_layers: usize, trainable: bool, theta: Vec<f64>) -> Result<Self> {
        if kernel == 0 || stride == 0 {
            return Err(Error::config("kernel and stride must be positive"));
        }
        let pixels = kernel * kernel;
        if !pixels.is_multiple_of(4) {
            return Err(Error::config(format!(
                "a {kernel}x{kernel} kernel cannot be split into four features per qubit"
            )));
        }
        let qnn = QnnSpec::new(pixels / 4, EncoderKind::AngleFourToOne, num_layers)?;
        if theta.len() != qnn.num_params() {
            return Err(Error::config(format!(
                "filter needs {} parameters, got {}",
                qnn.num_params(),
                theta.len()
            )));
        }
        let circuit = qnn.build()?;
        Ok(Self {
            kernel,
            stride,
            qnn,
            circuit,
            trainable,
            theta,
        })
    }

    /// Parameters drawn uniformly from `(-π, π)`.
    pub fn random<R: Rng + ?Sized>(
        kernel: usize,
        stride: usize,
        num_layers: usize,
        trainable: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let num_params = (kernel * kernel / 4) * 2 * num_layers;
        let mut f = Self::new(kernel, stride, num_layers, trainable, vec![0.0; num_params])?;
        f.theta = f.qnn.init_params(rng);
        Ok(f)
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn qnn(&self) -> &QnnSpec {
        &self.qnn
    }

    pub fn num_qubits(&self) -> usize {
        self.qnn.num_qubits
    }

    pub fn circuit(&self) -> &CircuitSpec {
        &self.circuit
    }

    fn encode_patch(&self, patch: &[f64]) -> Result<Vec<f64>> {
        let want = self.kernel * self.kernel;
        if patch.len() != want {
            return Err(Error::shape(format!(
                "patch has {} pixels, filter expects {want}",
                patch.len()
            )));
        }
        scale_features(patch, 0.0, 1.0)
    }

    /// Z expectations of one flattened window with pixels in `[0, 1]`.
    pub fn filter_forward(&self, patch: &[f64]) -> Result<Vec<f64>> {
        let angles = self.encode_patch(patch)?;
        self.circuit.expectations(&angles, &self.theta)
    }

    pub fn output_shape(&self, height: usize, width: usize) -> Result<(usize, usize, usize)> {
        let (gh, gw) = grid_size(height, width, self.kernel, self.stride)?;
        Ok((gh, gw, self.num_qubits()))
    }

    pub fn quanv_forward(&self, image: &Tensor) -> Result<FeatureMap> {
        let (h, w) = image_hw(image)?;
        let (gh, gw, ch) = self.output_shape(h, w)?;
        let patches = extract_patches(image, self.kernel, self.stride)?;
        let cells = patches
            .par_iter()
            .map(|p| self.filter_forward(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMap {
            height: gh,
            width: gw,
            channels: ch,
            values: cells.concat(),
        })
    }

    /// Gradient of `Σ upstream · map` with respect to `theta`, summed over
    /// every window. Frozen filters return zeros without running circuits.
    pub fn quanv_backward(&self, image: &Tensor, upstream: &[f64]) -> Result<Vec<f64>> {
        let (h, w) = image_hw(image)?;
        let (gh, gw, ch) = self.output_shape(h, w)?;
        if upstream.len() != gh * gw * ch {
            return Err(Error::shape(format!(
                "upstream gradient has {} values, feature map has {}",
                upstream.len(),
                gh * gw * ch
            )));
        }
        if !self.trainable {
            return Ok(vec![0.0; self.theta.len()]);
        }
        let patches = extract_patches(image, self.kernel, self.stride)?;
        let per_patch = patches
            .par_iter()
            .zip(upstream.par_chunks(ch))
            .map(|(patch, up)| {
                let angles = self.encode_patch(patch)?;
                let jac = shift_rule_grad(&ExpectationFn::new(&self.circuit, &angles), &self.theta)?;
                jac.vjp(up)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut grad = vec![0.0; self.theta.len()];
        for g in per_patch {
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        Ok(grad)
    }

    /// Circuit executions for one sample on an `height×width` image.
    pub fn budget(&self, height: usize, width: usize, batch: usize) -> CircuitBudget {
        let (single, crz) = self.qnn.param_kinds();
        CircuitBudget {
            height,
            width,
            kernel: self.kernel,
            stride: self.stride,
            params_single: single,
            params_crz: crz,
            trainable: self.trainable,
            batch,
            accounting: ShiftAccounting::Exact,
        }
    }
}

/// How CRZ parameters are costed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftAccounting {
    /// Two evaluations per single-qubit parameter, four per CRZ parameter.
    Exact,
    /// Every parameter costs two evaluations (CRZ folded into the single-qubit count).
    TwoTermOnly,
}

/// Inputs to the circuit-execution count of a quanvolution pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitBudget {
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub params_single: usize,
    pub params_crz: usize,
    pub trainable: bool,
    pub batch: usize,
    pub accounting: ShiftAccounting,
}

impl CircuitBudget {
    pub fn patches(&self) -> Result<usize> {
        let (gh, gw) = grid_size(self.height, self.width, self.kernel, self.stride)?;
        Ok(gh * gw)
    }

    /// Extra executions per window needed for the gradient.
    pub fn gradient_evals_per_patch(&self) -> usize {
        if !self.trainable {
            return 0;
        }
        match self.accounting {
            ShiftAccounting::Exact => shift_eval_count(self.params_single, self.params_crz),
            ShiftAccounting::TwoTermOnly => shift_eval_count(self.params_single + self.params_crz, 0),
        }
    }

    pub fn per_sample(&self) -> Result<usize> {
        Ok(self.patches()? * (1 + self.gradient_evals_per_patch()))
    }

    pub fn total(&self) -> Result<usize> {
        Ok(self.batch * self.per_sample()?)
    }
}

/// Total circuit executions for a batch: `batch · patches · (1 + gradient evals)`.
#[allow(clippy::too_many_arguments)]
pub fn execution_count(
    height: usize,
    width: usize,
    kernel: usize,
    stride: usize,
    params_single: usize,
    params_crz: usize,
    trainable: bool,
    batch: usize,
) -> Result<usize> {
    CircuitBudget {
        height,
        width,
        kernel,
        stride,
        params_single,
        params_crz,
        trainable,
        batch,
        accounting: ShiftAccounting::Exact,
    }
    .total()
}
