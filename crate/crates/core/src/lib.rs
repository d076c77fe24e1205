//! Heterogeneous-incomplete variational autoencoder for mixed-type tables
//! with missing cells.
//!
//! The crate is organised bottom-up: [`tabular`] holds typed data, masks and
//! normalization, [`compute`] a reverse-mode autodiff core, [`recognition`]
//! and [`generative`] the encoder and decoder networks, [`training`] the ELBO
//! and optimizer loop, [`imputation`] the fill-in procedures and [`benchmark`]
//! the error metrics and experiment grid. [`cli`] binds them to the `hivae`
//! executable.

pub mod benchmark;
pub mod cli;
pub mod compute;
pub mod generative;
pub mod imputation;
pub mod recognition;
pub mod tabular;
pub mod training;
