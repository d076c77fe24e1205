use rand::Rng;

use super::{EncoderMode, TrainConfig, TrainError};
use crate::compute::ParamStore;
use crate::generative::GenerativeNets;
use crate::recognition::EncoderNets;
use crate::tabular::{EncodingLayout, Schema};

/// Architecture and weights of a HI-VAE for one schema.
#[derive(Clone, Debug)]
pub struct HiVae {
    pub schema: Schema,
    pub config: TrainConfig,
    pub store: ParamStore,
    pub encoder: EncoderNets,
    pub decoder: GenerativeNets,
}

impl HiVae {
    /// Builds and randomly initializes every network. Parameter registration
    /// order depends only on `schema` and `config`.
    pub fn new<R: Rng + ?Sized>(schema: &Schema, config: &TrainConfig, rng: &mut R) -> Result<Self, TrainError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let width = EncodingLayout::new(schema).width();
        let hidden = config.hidden_width();
        let encoder = match config.encoder {
            EncoderMode::InputDropout => {
                EncoderNets::input_dropout(&mut store, width, config.dim_z, config.dim_s, hidden, rng)
            }
            EncoderMode::Factorized => EncoderNets::factorized(&mut store, schema, config.dim_z, rng),
        };
        let decoder = GenerativeNets::new(&mut store, schema, config.dim_z, config.dim_s, config.dim_y, hidden, rng);
        Ok(Self { schema: schema.clone(), config: config.clone(), store, encoder, decoder })
    }
}
