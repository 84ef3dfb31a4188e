//! Small classical network kernel with hand-written forward and backward passes.
//!
//! Tensors carry a single sample; batching is done by the trainers, which
//! accumulate per-sample gradients in a fixed order.

mod checkpoint;
mod layers;
mod loss;
mod optim;
mod sequential;
mod tensor;

pub use checkpoint::{MAGIC as CHECKPOINT_MAGIC, VERSION as CHECKPOINT_VERSION};
pub use layers::{Conv2d, ConvTranspose2d, Dense, Layer, LayerCache};
pub use loss::{mse_loss, softmax_cross_entropy};
pub use optim::{Optimizer, OptimizerSpec};
pub use sequential::{ForwardCache, Grads, Sequential};
pub use tensor::Tensor;

pub(crate) use layers::maxpool_forward;
