use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EpochRecord, HiVae, ModelState, TrainConfig, TrainError};
use crate::compute::{AdamConfig, Tensor};
use crate::tabular::{NormalizationStats, Schema};

pub const MODEL_FORMAT: &str = "hivae-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("unsupported model file version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("schema fingerprint mismatch: model {model}, data {data}")]
    Fingerprint { model: String, data: String },
}

#[derive(Serialize, Deserialize)]
struct OptimizerRecord {
    name: String,
    #[serde(flatten)]
    config: AdamConfig,
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: [usize; 2],
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    fingerprint: String,
    schema: Schema,
    config: TrainConfig,
    optimizer: OptimizerRecord,
    normalization: NormalizationStats,
    params: Vec<ParamRecord>,
    elbo_log: Vec<EpochRecord>,
}

impl ModelState {
    /// Fails unless `schema` is the one the model was trained on.
    pub fn ensure_compatible(&self, schema: &Schema) -> Result<(), ModelFileError> {
        let data = schema.fingerprint();
        let model = self.fingerprint();
        if data == model {
            Ok(())
        } else {
            Err(ModelFileError::Fingerprint { model, data })
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            fingerprint: self.fingerprint(),
            schema: self.model.schema.clone(),
            config: self.model.config.clone(),
            optimizer: OptimizerRecord { name: "adam".into(), config: self.model.config.optimizer },
            normalization: self.stats.clone(),
            params: self
                .model
                .store
                .iter()
                .map(|p| ParamRecord {
                    name: p.name.clone(),
                    shape: [p.value.rows(), p.value.cols()],
                    values: p.value.data().to_vec(),
                })
                .collect(),
            elbo_log: self.log.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("model file serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ModelFileError> {
        let header: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelFileError::Corrupt(e.to_string()))?;
        if header.get("format").and_then(|f| f.as_str()) != Some(MODEL_FORMAT) {
            return Err(ModelFileError::Corrupt("missing or unknown format tag".into()));
        }
        let version = header
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ModelFileError::Corrupt("missing version".into()))?;
        if version != u64::from(MODEL_VERSION) {
            return Err(ModelFileError::Version { found: version as u32, expected: MODEL_VERSION });
        }
        let file: ModelFile = serde_json::from_value(header).map_err(|e| ModelFileError::Corrupt(e.to_string()))?;
        if file.schema.fingerprint() != file.fingerprint {
            return Err(ModelFileError::Corrupt("fingerprint does not match stored schema".into()));
        }
        if file.normalization.len() != file.schema.len() {
            return Err(ModelFileError::Corrupt("normalization stats do not cover the schema".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(file.config.seed);
        let mut model = HiVae::new(&file.schema, &file.config, &mut rng).map_err(|e| match e {
            TrainError::InvalidConfig(m) => ModelFileError::Corrupt(m),
            other => ModelFileError::Corrupt(other.to_string()),
        })?;
        if model.store.len() != file.params.len() {
            return Err(ModelFileError::Corrupt(format!(
                "expected {} parameter arrays, found {}",
                model.store.len(),
                file.params.len()
            )));
        }
        for rec in file.params {
            let id = model
                .store
                .find(&rec.name)
                .ok_or_else(|| ModelFileError::Corrupt(format!("unknown parameter {}", rec.name)))?;
            let current = model.store.value(id);
            if current.shape() != (rec.shape[0], rec.shape[1]) {
                return Err(ModelFileError::Corrupt(format!("shape mismatch for {}", rec.name)));
            }
            let t = Tensor::new(rec.shape[0], rec.shape[1], rec.values)
                .map_err(|_| ModelFileError::Corrupt(format!("value count mismatch for {}", rec.name)))?;
            if !t.all_finite() {
                return Err(ModelFileError::Corrupt(format!("non-finite values in {}", rec.name)));
            }
            *model.store.value_mut(id) = t;
        }
        Ok(ModelState { model, stats: file.normalization, log: file.elbo_log })
    }
}

pub fn save_model(state: &ModelState, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    fs::write(path, state.to_json())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelState, ModelFileError> {
    let text = fs::read_to_string(path)?;
    ModelState::from_json(&text)
}
