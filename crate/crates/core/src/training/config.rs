use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::compute::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    /// Zero-filled input `x̃` feeding shared encoder networks.
    InputDropout,
    /// Product of per-attribute Gaussian experts; single mixture component.
    Factorized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Latent dimension `K`.
    pub dim_z: usize,
    /// Number of mixture components `L`.
    pub dim_s: usize,
    /// Width of each attribute's slice of the shared representation.
    pub dim_y: usize,
    /// Dense layers per encoder/decoder network (1 or 2).
    pub layers: usize,
    /// Hidden width used when `layers == 2`.
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    pub seed: u64,
    pub encoder: EncoderMode,
    /// Batch normalization of numeric inputs and denormalization of outputs.
    pub normalization: bool,
    /// Sum the z-KL over all mixture components instead of evaluating it at the sampled `s`.
    pub exact_kl_z: bool,
    pub optimizer: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim_z: 10,
            dim_s: 10,
            dim_y: 5,
            layers: 1,
            hidden: 50,
            epochs: 2000,
            batch_size: 1000,
            tau_start: 1.0,
            tau_end: 1e-3,
            seed: 0,
            encoder: EncoderMode::InputDropout,
            normalization: true,
            exact_kl_z: false,
            optimizer: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_owned()));
        if self.dim_z == 0 || self.dim_s == 0 || self.dim_y == 0 {
            return bad("dim_z, dim_s and dim_y must be at least 1");
        }
        if !(1..=2).contains(&self.layers) {
            return bad("layers must be 1 or 2");
        }
        if self.layers == 2 && self.hidden == 0 {
            return bad("hidden width must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.tau_end > 0.0 && self.tau_end <= self.tau_start && self.tau_start.is_finite()) {
            return bad("temperatures must satisfy 0 < tau_end <= tau_start");
        }
        if self.encoder == EncoderMode::Factorized && self.dim_s > 1 {
            return bad("the factorized encoder supports a single mixture component (dim_s = 1)");
        }
        if self.exact_kl_z && self.dim_s > 16 {
            return bad("exact z-KL enumeration is limited to dim_s <= 16");
        }
        Ok(())
    }

    /// Linear annealing from `tau_start` at the first epoch to `tau_end` at the last.
    pub fn temperature(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.tau_start;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.tau_start + (self.tau_end - self.tau_start) * t
    }

    pub(crate) fn hidden_width(&self) -> Option<usize> {
        (self.layers == 2).then_some(self.hidden)
    }
}
