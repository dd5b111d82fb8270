//! Differentiable layer primitives with explicit forward caches.
//!
//! Every forward function takes a [`LayerContext`]. In training mode the
//! context keeps whatever the matching backward needs; in inference mode it
//! stays empty and calling backward on it is a usage error.

mod activation;
mod batchnorm;
mod context;
mod conv;
mod dense;
mod loss;
mod pool;

pub use activation::{relu, relu_backward};
pub use batchnorm::{
    batchnorm_backward, batchnorm_batch, batchnorm_forward, batchnorm_inference, BatchNormGrads,
    BatchNormState, BatchStats,
};
pub use context::LayerContext;
pub use conv::{conv1d_backward, conv1d_forward, output_len, ConvGrads, Padding};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use loss::{one_hot, softmax, softmax_xent, SoftmaxXent, LOG_FLOOR};
pub use pool::{global_mean_pool, global_mean_pool_backward, maxpool1d, maxpool1d_backward};
