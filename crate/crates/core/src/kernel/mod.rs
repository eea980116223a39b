//! Minimal reverse-mode kernel: each op has a forward and an explicit
//! backward that accumulates into the gradient planes of its tensors.

pub mod activation;
pub mod conv;
mod gemm;
pub mod linear;
pub mod loss;
pub mod optim;
pub mod policy;

pub use activation::{global_max_pool, global_max_pool_backward, relu, relu_backward, Pooled};
pub use conv::{conv2d_forward, Conv2d, ConvSpec};
pub use linear::{linear, Linear};
pub use loss::huber_loss;
pub use optim::{rmsprop_step, RmsProp, RmsPropConfig};
pub use policy::{kl_divergence, kl_to_softmax, softmax_temperature, PolicyDistribution};
