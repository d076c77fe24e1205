use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{elbo_batch, HiVae, TrainConfig, TrainError};
use crate::compute::AdamState;
use crate::tabular::{fit_normalization, HeterogeneousTable, MissingMask, NormalizationStats, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub tau: f64,
    /// ELBO summed over the epoch's batches, divided by the number of rows.
    pub elbo: f64,
}

/// A trained model with the statistics used at inference time.
#[derive(Clone, Debug)]
pub struct ModelState {
    pub model: HiVae,
    /// Fitted on every observed training cell, or identity when normalization is off.
    pub stats: NormalizationStats,
    pub log: Vec<EpochRecord>,
}

impl ModelState {
    pub fn schema(&self) -> &Schema {
        &self.model.schema
    }

    pub fn config(&self) -> &TrainConfig {
        &self.model.config
    }

    pub fn fingerprint(&self) -> String {
        self.model.schema.fingerprint()
    }
}

/// Statistics for deterministic inference over a whole table.
pub fn inference_stats(table: &HeterogeneousTable, mask: &MissingMask, config: &TrainConfig) -> NormalizationStats {
    if config.normalization && table.rows() > 0 {
        let all: Vec<usize> = (0..table.rows()).collect();
        fit_normalization(table, mask, &all)
    } else {
        NormalizationStats::identity(table.schema())
    }
}

pub fn train(table: &HeterogeneousTable, mask: &MissingMask, config: &TrainConfig) -> Result<ModelState, TrainError> {
    train_with_observer(table, mask, config, |_| {})
}

/// Minibatch Adam on the negative ELBO, calling `observer` after every epoch.
///
/// Rows are reshuffled each epoch from the seeded stream; the trailing short
/// batch is kept. With normalization on, statistics are refitted per batch.
pub fn train_with_observer<F: FnMut(&EpochRecord)>(
    table: &HeterogeneousTable,
    mask: &MissingMask,
    config: &TrainConfig,
    mut observer: F,
) -> Result<ModelState, TrainError> {
    config.validate()?;
    if table.rows() == 0 {
        return Err(TrainError::EmptyTable);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = HiVae::new(table.schema(), config, &mut rng)?;
    let mut adam = AdamState::new(config.optimizer, &model.store);
    let mut order: Vec<usize> = (0..table.rows()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let tau = config.temperature(epoch);
        order.shuffle(&mut rng);
        let mut epoch_elbo = 0.0;
        for (batch, rows) in order.chunks(config.batch_size).enumerate() {
            let stats = if config.normalization {
                fit_normalization(table, mask, rows)
            } else {
                NormalizationStats::identity(table.schema())
            };
            let mut eval = elbo_batch(&model, table, mask, rows, &stats, tau, &mut rng)?;
            let elbo = eval.value();
            if !elbo.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch });
            }
            epoch_elbo += elbo;
            let loss = eval.graph.scale(eval.terms.total, -1.0 / rows.len() as f64);
            eval.graph.backward(loss, &mut model.store)?;
            adam.step(&mut model.store);
            if !model.store.all_finite() {
                return Err(TrainError::NonFinite { epoch, batch });
            }
        }
        let record = EpochRecord { epoch, tau, elbo: epoch_elbo / table.rows() as f64 };
        observer(&record);
        log.push(record);
    }

    let stats = inference_stats(table, mask, config);
    Ok(ModelState { model, stats, log })
}
