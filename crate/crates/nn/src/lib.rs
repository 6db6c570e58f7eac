//! A from-scratch tensor, layer and optimizer core for small residual
//! convolutional networks.
//!
//! Everything here is deterministic: parameter initialization and dropout
//! masks come from seeded ChaCha8 streams, and batch-parallel kernels reduce
//! per-sample gradients in sample order, so loss trajectories do not depend
//! on the number of worker threads.
//!
//! Tensors are row-major. Image batches use `[batch, channels, height, width]`,
//! feature batches use `[batch, features]`.

mod conv;
mod error;
mod init;
mod io;
mod layers;
mod loss;
mod optim;
mod param;
mod residual;
mod tensor;

#[cfg(any(test, feature = "testing"))]
pub mod gradcheck;

pub use conv::{conv2d_backward, conv2d_forward, conv_output_extent, Conv2d, Conv2dGrads};
pub use error::{NnError, Result};
pub use init::{xavier_bound, xavier_init, xavier_uniform};
pub use io::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use layers::{
    Activation, ActivationLayer, Concat, Dropout, GlobalAvgPool, L2Norm, Linear, Sequential,
};
pub use loss::{mse_loss, softmax, softmax_cross_entropy};
pub use optim::{plateau_schedule, PlateauScheduler, Sgd, SgdConfig};
pub use param::{Param, Parameterized};
pub use residual::ResidualBlock;
pub use tensor::Tensor;

/// Element type of every tensor.
#[cfg(not(feature = "f32"))]
pub type Scalar = f64;
/// Element type of every tensor.
#[cfg(feature = "f32")]
pub type Scalar = f32;

/// Forward-pass mode. Dropout is only active in [`Mode::Train`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Layer kinds known to the core.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv2d,
    FullyConnected,
    Relu,
    Tanh,
    Dropout,
    GlobalAvgPool,
    L2Norm,
    Concat,
    ResidualBlock,
    Sequential,
}

/// A differentiable layer with a single input and a single output.
///
/// `forward` caches whatever `backward` needs; `infer` is the side-effect
/// free evaluation-mode path used for read-only inference.
pub trait Layer: Parameterized + Send + Sync {
    fn kind(&self) -> LayerKind;
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor>;
    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor>;
    fn infer(&self, input: &Tensor) -> Result<Tensor>;
}
