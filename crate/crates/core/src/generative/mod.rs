//! Decoder side: mixture prior, shared representation, per-attribute heads and
//! the five likelihood models.

mod likelihood;
mod nets;

pub use likelihood::{
    column_params, log_likelihood, mode, prior_log_density, sample, LikelihoodError, LikelihoodParams, GAP_FLOOR,
    PROB_FLOOR, RATE_FLOOR, VAR_FLOOR,
};
pub use nets::{column_log_lik, ColumnHead, GenerativeNets, HeadOutputs};
