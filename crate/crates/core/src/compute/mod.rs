//! Numerical substrate: reverse-mode autodiff, dense layers, samplers and Adam.

mod adam;
mod dense;
mod graph;
mod params;
mod sampling;

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, DenseLayer, Mlp};
pub use graph::{log_softmax, sigmoid, softmax, softplus, Gradients, Graph, Tensor, Var};
pub use params::{Param, ParamId, ParamStore};
pub use sampling::{
    gaussian_reparam, gaussian_reparam_with_noise, gumbel_softmax, gumbel_softmax_with_noise, gumbel_tensor,
    standard_gumbel, standard_normal_tensor, LOG_VAR_MAX, LOG_VAR_MIN,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComputeError {
    #[error("{op}: expected {expected}, found {found}")]
    ShapeMismatch { op: &'static str, expected: String, found: String },
    #[error("backward requires a scalar loss, got a {rows}x{cols} tensor")]
    NonScalarLoss { rows: usize, cols: usize },
}
