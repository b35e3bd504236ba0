//! A small differentiable-network kit: exactly the layers the convolutional
//! feature extractor needs, with manual backward passes, domain-specific
//! batch normalization, gradient reversal, input adapters and Adam.

mod layers;
mod model;
mod params;

pub use layers::*;
pub use model::{
    architecture, build_model, build_model_adapted, kronecker_backward, kronecker_rows, Adapter, BnBranch, ConvLayer,
    Domain, ForwardCache, ForwardOutput, LinearLayer, Mode, ModelBundle, Shape,
};
pub use params::{AdamConfig, Param, ParamId, ParamStore};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("input shape {got:?} does not match the model's {expected:?} (channels, length)")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("train-mode batch normalization needs a batch of at least 2")]
    BatchTooSmall,
    #[error("forward cache is stale: parameters changed since it was produced")]
    StaleCache,
}
