//! The HI-VAE objective, the minibatch optimizer loop and model persistence.

mod config;
mod elbo;
mod model;
mod persist;
mod train;

pub use config::{EncoderMode, TrainConfig};
pub use elbo::{
    categorical_kl_uniform, elbo_batch, elbo_batch_with_noise, gaussian_kl, ElboEvaluation, ElboNoise, ElboTerms,
};
pub use model::HiVae;
pub use persist::{load_model, save_model, ModelFileError, MODEL_FORMAT, MODEL_VERSION};
pub use train::{inference_stats, train, train_with_observer, EpochRecord, ModelState};

use thiserror::Error;

use crate::compute::ComputeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot train on an empty table")]
    EmptyTable,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error(transparent)]
    Compute(#[from] ComputeError),
}
