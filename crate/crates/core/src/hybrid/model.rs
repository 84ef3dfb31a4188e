use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::binio::{put_f64s, put_u32, put_u64, read_file, write_atomic, ByteReader};
use crate::circuits::{EncoderKind, MinMaxScaler, QnnSpec};
use crate::error::{Error, Result};
use crate::nn::{softmax_cross_entropy, Dense, Layer, OptimizerSpec, Sequential, Tensor};
use crate::qgrad::{shift_eval_count, shift_rule_grad, ExpectationFn};
use crate::qsim::CircuitSpec;
use crate::quanv::QuantumFilter;
use crate::rng::substream;

pub const HYBRID_MAGIC: &[u8; 8] = b"QNNHYBR1";
pub const HYBRID_VERSION: u32 = 1;

/// Network family and its shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelVariant {
    /// Quantum filter → flatten → Dense(hidden) → ReLU → Dense(classes).
    QuanvNet {
        kernel: usize,
        stride: usize,
        layers: usize,
        trainable: bool,
        hidden: usize,
        classes: usize,
    },
    /// Scaled features → 1:1 angle-encoded QNN → all-qubit ⟨Z⟩ → Dense(classes).
    QnnHead {
        num_qubits: usize,
        layers: usize,
        classes: usize,
        trainable: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub optimizer: OptimizerSpec,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
}

/// Layer count giving 60 circuit parameters for `num_qubits` qubits
/// (3 for ten qubits, 6 for five).
pub fn auto_layers(num_qubits: usize) -> Result<usize> {
    if num_qubits == 0 || 60 % (2 * num_qubits) != 0 {
        return Err(Error::config(format!(
            "no layer count gives 60 parameters on {num_qubits} qubits; pass --layers"
        )));
    }
    Ok(60 / (2 * num_qubits))
}

impl ModelSpec {
    /// 4×4 filter at stride 4, three layers, hidden width 32, three classes,
    /// Adagrad(0.5), 10 epochs, batches of 50.
    pub fn quanvnet(trainable: bool, seed: u64) -> Self {
        Self {
            variant: ModelVariant::QuanvNet {
                kernel: 4,
                stride: 4,
                layers: 3,
                trainable,
                hidden: 32,
                classes: 3,
            },
            optimizer: OptimizerSpec::adagrad(0.5),
            epochs: 10,
            batch: 50,
            seed,
        }
    }

    /// QNN over `num_features` qubits with [`auto_layers`], SGD(0.5), 20 epochs.
    pub fn qnn_head(num_features: usize, classes: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            variant: ModelVariant::QnnHead {
                num_qubits: num_features,
                layers: auto_layers(num_features)?,
                classes,
                trainable: true,
            },
            optimizer: OptimizerSpec::sgd(0.5),
            epochs: 20,
            batch: 50,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.batch == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        let classes = match self.variant {
            ModelVariant::QuanvNet { hidden, classes, .. } => {
                if hidden == 0 {
                    return Err(Error::config("hidden width must be positive"));
                }
                classes
            }
            ModelVariant::QnnHead { classes, .. } => classes,
        };
        if classes < 2 {
            return Err(Error::config(format!("need at least two classes, got {classes}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuanvNet {
    pub filter: QuantumFilter,
    pub height: usize,
    pub width: usize,
    pub head: Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QnnHead {
    pub qnn: QnnSpec,
    circuit: CircuitSpec,
    pub theta: Vec<f64>,
    pub trainable: bool,
    pub scaler: MinMaxScaler,
    pub head: Sequential,
}

impl QnnHead {
    pub fn new(qnn: QnnSpec, theta: Vec<f64>, trainable: bool, scaler: MinMaxScaler, head: Sequential) -> Result<Self> {
        if qnn.encoder != EncoderKind::AngleOneToOne {
            return Err(Error::config("the QNN head uses one feature per qubit"));
        }
        if theta.len() != qnn.num_params() {
            return Err(Error::config(format!(
                "QNN needs {} parameters, got {}",
                qnn.num_params(),
                theta.len()
            )));
        }
        if scaler.dim() != qnn.num_qubits {
            return Err(Error::config(format!(
                "{} features cannot drive {} qubits",
                scaler.dim(),
                qnn.num_qubits
            )));
        }
        let circuit = qnn.build()?;
        Ok(Self {
            qnn,
            circuit,
            theta,
            trainable,
            scaler,
            head,
        })
    }

    pub fn circuit(&self) -> &CircuitSpec {
        &self.circuit
    }
}

/// A trained or freshly initialised end-to-end classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum HybridModel {
    QuanvNet(QuanvNet),
    QnnHead(QnnHead),
}

/// Loss, per-group gradients and circuit executions for one sample.
pub(crate) struct SampleGrad {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
    pub executions: u64,
}

fn head_dense<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Layer {
    Layer::Dense(Dense::new(inputs, outputs, rng))
}

impl HybridModel {
    /// Fresh QuanvNet for `height×width` images, initialised from `spec.seed`.
    pub fn init_quanvnet(spec: &ModelSpec, height: usize, width: usize) -> Result<Self> {
        spec.validate()?;
        let ModelVariant::QuanvNet {
            kernel,
            stride,
            layers,
            trainable,
            hidden,
            classes,
        } = spec.variant
        else {
            return Err(Error::config("model spec is not a QuanvNet"));
        };
        let mut rng = substream(spec.seed, "init");
        let filter = QuantumFilter::random(kernel, stride, layers, trainable, &mut rng)?;
        let (gh, gw, ch) = filter.output_shape(height, width)?;
        let flat = gh * gw * ch;
        let head = Sequential::new(vec![
            head_dense(flat, hidden, &mut rng),
            Layer::Relu,
            head_dense(hidden, classes, &mut rng),
        ]);
        Ok(HybridModel::QuanvNet(QuanvNet {
            filter,
            height,
            width,
            head,
        }))
    }

    /// Fresh QNN head with a scaler fitted on `train_rows`.
    pub fn init_qnn_head(spec: &ModelSpec, train_rows: &[Vec<f64>]) -> Result<Self> {
        spec.validate()?;
        let ModelVariant::QnnHead {
            num_qubits,
            layers,
            classes,
            trainable,
        } = spec.variant
        else {
            return Err(Error::config("model spec is not a QNN head"));
        };
        let scaler = MinMaxScaler::fit(train_rows)?;
        if scaler.dim() != num_qubits {
            return Err(Error::config(format!(
                "feature dimension {} does not match {num_qubits} qubits",
                scaler.dim()
            )));
        }
        let qnn = QnnSpec::new(num_qubits, EncoderKind::AngleOneToOne, layers)?;
        let mut rng = substream(spec.seed, "init");
        let theta = qnn.init_params(&mut rng);
        let head = Sequential::new(vec![head_dense(num_qubits, classes, &mut rng)]);
        Ok(HybridModel::QnnHead(QnnHead::new(qnn, theta, trainable, scaler, head)?))
    }

    pub fn input_len(&self) -> usize {
        match self {
            HybridModel::QuanvNet(m) => m.height * m.width,
            HybridModel::QnnHead(m) => m.qnn.num_qubits,
        }
    }

    pub fn num_classes(&self) -> usize {
        let head = match self {
            HybridModel::QuanvNet(m) => &m.head,
            HybridModel::QnnHead(m) => &m.head,
        };
        match head.layers.last() {
            Some(Layer::Dense(d)) => d.out_features,
            _ => 0,
        }
    }

    /// Circuit parameters, trainable or not.
    pub fn quantum_params(&self) -> &[f64] {
        match self {
            HybridModel::QuanvNet(m) => &m.filter.theta,
            HybridModel::QnnHead(m) => &m.theta,
        }
    }

    pub fn quantum_trainable(&self) -> bool {
        match self {
            HybridModel::QuanvNet(m) => m.filter.trainable,
            HybridModel::QnnHead(m) => m.trainable,
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::shape(format!(
                "model expects {} inputs, got {}",
                self.input_len(),
                x.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("input value {i} is {}", x[i])));
        }
        Ok(())
    }

    /// Quantum stage output for one input.
    fn quantum_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        match self {
            HybridModel::QuanvNet(m) => {
                let image = Tensor::new(vec![m.height, m.width], x.to_vec())?;
                Ok(m.filter.quanv_forward(&image)?.values)
            }
            HybridModel::QnnHead(m) => {
                let angles = m.scaler.transform(x)?;
                m.circuit.expectations(&angles, &m.theta)
            }
        }
    }

    fn head(&self) -> &Sequential {
        match self {
            HybridModel::QuanvNet(m) => &m.head,
            HybridModel::QnnHead(m) => &m.head,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let q = self.quantum_features(x)?;
        Ok(self.head().infer(&Tensor::vector(q))?.into_data())
    }

    /// Cross-entropy loss of one sample.
    pub fn loss(&self, x: &[f64], label: usize) -> Result<f64> {
        Ok(softmax_cross_entropy(&self.logits(x)?, label)?.0)
    }

    /// Circuit executions for one training step on one sample.
    pub fn executions_per_sample(&self) -> Result<u64> {
        let (windows, qnn, trainable) = match self {
            HybridModel::QuanvNet(m) => {
                let (gh, gw, _) = m.filter.output_shape(m.height, m.width)?;
                (gh * gw, m.filter.qnn(), m.filter.trainable)
            }
            HybridModel::QnnHead(m) => (1, &m.qnn, m.trainable),
        };
        let grad = if trainable {
            let (single, crz) = qnn.param_kinds();
            shift_eval_count(single, crz)
        } else {
            0
        };
        Ok((windows * (1 + grad)) as u64)
    }

    /// Gradient groups in optimizer order: circuit parameters first (only if
    /// trainable), then the classical head.
    pub(crate) fn sample_grad(&self, x: &[f64], label: usize) -> Result<SampleGrad> {
        let q = self.quantum_features(x)?;
        let (logits, cache) = self.head().forward(&Tensor::vector(q))?;
        let (loss, dlogits) = softmax_cross_entropy(logits.data(), label)?;
        let (head_grads, dq) = self.head().backward(&cache, &Tensor::vector(dlogits))?;
        let mut grads = Vec::with_capacity(head_grads.0.len() + 1);
        if self.quantum_trainable() {
            let g = match self {
                HybridModel::QuanvNet(m) => {
                    let image = Tensor::new(vec![m.height, m.width], x.to_vec())?;
                    m.filter.quanv_backward(&image, dq.data())?
                }
                HybridModel::QnnHead(m) => {
                    let angles = m.scaler.transform(x)?;
                    let jac = shift_rule_grad(&ExpectationFn::new(&m.circuit, &angles), &m.theta)?;
                    jac.vjp(dq.data())?
                }
            };
            grads.push(g);
        }
        grads.extend(head_grads.0);
        Ok(SampleGrad {
            loss,
            grads,
            executions: self.executions_per_sample()?,
        })
    }

    /// Parameter groups in the order of [`Self::sample_grad`].
    pub(crate) fn trainable_groups_mut(&mut self) -> Vec<&mut [f64]> {
        let (theta, trainable, head): (&mut Vec<f64>, bool, &mut Sequential) = match self {
            HybridModel::QuanvNet(m) => (&mut m.filter.theta, m.filter.trainable, &mut m.head),
            HybridModel::QnnHead(m) => (&mut m.theta, m.trainable, &mut m.head),
        };
        let mut groups: Vec<&mut [f64]> = Vec::new();
        if trainable {
            groups.push(theta.as_mut_slice());
        }
        groups.extend(head.params_mut());
        groups
    }

    /// Flat view of every trainable parameter, for gradient checks.
    pub fn trainable_params(&mut self) -> Vec<&mut f64> {
        self.trainable_groups_mut().into_iter().flat_map(|g| g.iter_mut()).collect()
    }

    /// Flat gradient of the sample loss in the order of [`Self::trainable_params`].
    pub fn loss_gradient(&self, x: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        let s = self.sample_grad(x, label)?;
        Ok((s.loss, s.grads.concat()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(HYBRID_MAGIC);
        put_u32(&mut out, HYBRID_VERSION);
        match self {
            HybridModel::QuanvNet(m) => {
                out.push(1);
                for v in [m.filter.kernel(), m.filter.stride(), m.filter.qnn().num_layers] {
                    put_u64(&mut out, v as u64);
                }
                out.push(m.filter.trainable as u8);
                put_u64(&mut out, m.height as u64);
                put_u64(&mut out, m.width as u64);
                put_u64(&mut out, m.filter.theta.len() as u64);
                put_f64s(&mut out, &m.filter.theta);
                out.extend(m.head.to_checkpoint_bytes());
            }
            HybridModel::QnnHead(m) => {
                out.push(2);
                put_u64(&mut out, m.qnn.num_qubits as u64);
                put_u64(&mut out, m.qnn.num_layers as u64);
                out.push(m.trainable as u8);
                put_f64s(&mut out, &m.scaler.lo);
                put_f64s(&mut out, &m.scaler.hi);
                put_u64(&mut out, m.theta.len() as u64);
                put_f64s(&mut out, &m.theta);
                out.extend(m.head.to_checkpoint_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const MAX: u64 = 1 << 20;
        let mut r = ByteReader::new(bytes);
        r.expect_magic(HYBRID_MAGIC)?;
        let at = r.offset();
        let version = r.u32_le()?;
        if version != HYBRID_VERSION {
            return Err(Error::format(at, format!("unsupported model version {version}")));
        }
        let at = r.offset();
        let flag = |r: &mut ByteReader<&[u8]>| -> Result<bool> {
            let at = r.offset();
            match r.u8()? {
                0 => Ok(false),
                1 => Ok(true),
                v => Err(Error::format(at, format!("flag byte {v}"))),
            }
        };
        let model = match r.u8()? {
            1 => {
                let kernel = r.len_le(MAX, "kernel")?;
                let stride = r.len_le(MAX, "stride")?;
                let layers = r.len_le(MAX, "layers")?;
                let trainable = flag(&mut r)?;
                let height = r.len_le(MAX, "height")?;
                let width = r.len_le(MAX, "width")?;
                let n = r.len_le(MAX, "parameter count")?;
                let theta = r.f64s_le(n)?;
                let filter = QuantumFilter::new(kernel, stride, layers, trainable, theta)
                    .map_err(|e| Error::format(at, e.to_string()))?;
                let head = Sequential::read_checkpoint(&mut r)?;
                HybridModel::QuanvNet(QuanvNet {
                    filter,
                    height,
                    width,
                    head,
                })
            }
            2 => {
                let num_qubits = r.len_le(64, "qubit count")?;
                let layers = r.len_le(MAX, "layers")?;
                let trainable = flag(&mut r)?;
                let lo = r.f64s_le(num_qubits)?;
                let hi = r.f64s_le(num_qubits)?;
                let n = r.len_le(MAX, "parameter count")?;
                let theta = r.f64s_le(n)?;
                let head = Sequential::read_checkpoint(&mut r)?;
                let qnn = QnnSpec::new(num_qubits, EncoderKind::AngleOneToOne, layers)
                    .map_err(|e| Error::format(at, e.to_string()))?;
                HybridModel::QnnHead(
                    QnnHead::new(qnn, theta, trainable, MinMaxScaler { lo, hi }, head)
                        .map_err(|e| Error::format(at, e.to_string()))?,
                )
            }
            other => return Err(Error::format(at, format!("unknown model kind {other}"))),
        };
        r.expect_end()?;
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}
