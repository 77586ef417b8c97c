//! Layer primitives with hand-written backward passes, and the optimizer.
//!
//! Every forward returns the cache its backward consumes. Batched entry
//! points process samples independently (in parallel where it pays) and
//! reduce per-sample contributions in sample order, so results do not
//! depend on the worker count.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod pool;
mod rmsprop;

pub use activation::{leaky_relu_backward, leaky_relu_forward, LeakyCache, LEAKY_SLOPE};
pub use batchnorm::{
    batchnorm_backward, batchnorm_forward, BatchNormParams, BnCache, BnGrads, Mode, BN_EPS,
    BN_MOMENTUM,
};
pub use conv::{conv2d_backward, conv2d_forward, ConvCache, ConvGrads};
pub use dense::{dense_backward, dense_forward, dense_param_count, DenseCache, DenseGrads};
pub use pool::{maxpool2x2_backward, maxpool2x2_forward, PoolCache};
pub use rmsprop::{rmsprop_step, OptimizerState, RmsPropConfig};
