//! Neural predictive coding: self-supervised speaker embeddings from
//! unlabeled audio.
//!
//! Adjacent windows of one stream are presumed to share a speaker and
//! windows from different streams are presumed not to. A siamese CNN is
//! trained to tell the two apart, and its penultimate layer becomes a
//! frame-rate speaker embedding.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below name the common instantiations.

pub mod audio;
pub mod embed;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod nn;
pub mod sampler;
pub mod scalar;
pub mod synth;
pub mod tensor;

pub use error::{NpcError, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Features32 = audio::FeatureMatrix<f32>;
pub type Features64 = audio::FeatureMatrix<f64>;
/// Single-precision model, used for training and export.
pub type Model32 = model::ModelParams<f32>;
/// Double-precision model, used for gradient checks.
pub type Model64 = model::ModelParams<f64>;
pub type Pair32 = sampler::ContrastivePair<f32>;
pub type Pair64 = sampler::ContrastivePair<f64>;
