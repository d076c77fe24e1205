//! Filling missing cells from a trained model, and the label-prediction protocol.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::accuracy_error;
use crate::compute::{ComputeError, Tensor};
use crate::generative::{mode, sample, LikelihoodParams};
use crate::recognition::{encode, map_latent, sample_latent, LatentSample};
use crate::tabular::{encode_inputs, ColumnKind, HeterogeneousTable, MissingMask};
use crate::training::{train, ModelFileError, ModelState, TrainConfig, TrainError};

/// Rows decoded per graph during imputation.
const CHUNK_ROWS: usize = 1024;

#[derive(Debug, Error)]
pub enum ImputationError {
    #[error(transparent)]
    Incompatible(#[from] ModelFileError),
    #[error("mask is {mask_rows}x{mask_cols} but the table is {rows}x{cols}")]
    MaskShape { rows: usize, cols: usize, mask_rows: usize, mask_cols: usize },
    #[error("column {column} has no observed cell")]
    EmptyColumn { column: String },
    #[error("target column {column} is {kind}, expected cat")]
    NotCategorical { column: String, kind: &'static str },
    #[error("target column index {0} is out of range")]
    NoSuchColumn(usize),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    TrainFraction(f64),
    #[error("no held-out row has an observed label")]
    NoLabels,
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Compute(#[from] ComputeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillMethod {
    /// Mode of the likelihood decoded at the MAP latent.
    MapMode,
    /// One draw from the likelihood decoded at one posterior sample.
    Sample,
    /// Column mean or modal class of the observed cells.
    MeanMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FillRecord {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    /// Decoded distribution of the cell; absent for the baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<LikelihoodParams>,
    pub method: FillMethod,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputationResult {
    /// Input table with every missing cell replaced.
    pub completed: HeterogeneousTable,
    /// One record per filled cell, in row-major order.
    pub fills: Vec<FillRecord>,
}

impl ImputationResult {
    pub fn method(&self) -> Option<FillMethod> {
        self.fills.first().map(|f| f.method)
    }

    pub fn fills_json(&self) -> String {
        serde_json::to_string_pretty(&self.fills).expect("fill records serialize")
    }
}

pub(crate) fn check_mask(table: &HeterogeneousTable, mask: &MissingMask) -> Result<(), ImputationError> {
    if (mask.rows(), mask.cols()) != (table.rows(), table.cols()) {
        return Err(ImputationError::MaskShape {
            rows: table.rows(),
            cols: table.cols(),
            mask_rows: mask.rows(),
            mask_cols: mask.cols(),
        });
    }
    Ok(())
}

fn latent_tensors(latents: &[LatentSample]) -> (Tensor, Tensor) {
    let z: Vec<Vec<f64>> = latents.iter().map(|l| l.z.clone()).collect();
    let s: Vec<Vec<f64>> = latents.iter().map(|l| l.s.clone()).collect();
    (Tensor::from_rows(&z).expect("z rows"), Tensor::from_rows(&s).expect("s rows"))
}

fn impute_with<F, G>(
    state: &ModelState,
    table: &HeterogeneousTable,
    mask: &MissingMask,
    method: FillMethod,
    mut latents: G,
    mut value: F,
) -> Result<ImputationResult, ImputationError>
where
    G: FnMut(&[usize]) -> Result<Vec<LatentSample>, ImputationError>,
    F: FnMut(&LikelihoodParams) -> f64,
{
    state.ensure_compatible(table.schema())?;
    check_mask(table, mask)?;
    let model = &state.model;
    let mut completed = table.clone();
    let mut fills = Vec::new();
    let all: Vec<usize> = (0..table.rows()).filter(|&n| mask.row(n).contains(&false)).collect();
    for rows in all.chunks(CHUNK_ROWS) {
        let lat = latents(rows)?;
        let (z, s) = latent_tensors(&lat);
        let decoded = model.decoder.decode(&model.store, &model.schema, &z, &s, &state.stats)?;
        for (r, &n) in rows.iter().enumerate() {
            for d in mask.missing_set(n) {
                let params = decoded[r][d].clone();
                let v = value(&params);
                completed.set(n, d, v).expect("decoded modes and samples lie in the column's support");
                fills.push(FillRecord { row: n, col: d, value: v, params: Some(params), method });
            }
        }
    }
    Ok(ImputationResult { completed, fills })
}

/// Fills each missing cell with the mode of its decoded likelihood at the MAP
/// latent: the argmax component `ŝ` and the posterior mean of `z` given `ŝ`.
/// Observed cells are copied unchanged. Deterministic.
pub fn impute_map(
    state: &ModelState,
    table: &HeterogeneousTable,
    mask: &MissingMask,
) -> Result<ImputationResult, ImputationError> {
    let model = &state.model;
    impute_with(
        state,
        table,
        mask,
        FillMethod::MapMode,
        |rows| {
            let x = encode_inputs(table, mask, &state.stats, rows);
            Ok(encode(&model.encoder, &model.store, &x, None)?.iter().map(map_latent).collect())
        },
        mode,
    )
}

/// Fills each missing cell with a single draw: `s` by Gumbel-softmax at the
/// final training temperature, `z` from its posterior, then the cell from its
/// decoded likelihood.
pub fn impute_sample<R: Rng + ?Sized>(
    state: &ModelState,
    table: &HeterogeneousTable,
    mask: &MissingMask,
    rng: &mut R,
) -> Result<ImputationResult, ImputationError> {
    let model = &state.model;
    let tau = model.config.tau_end;
    // latent and cell draws share one stream, interleaved chunk by chunk
    let rng_cell = std::cell::RefCell::new(rng);
    impute_with(
        state,
        table,
        mask,
        FillMethod::Sample,
        |rows| {
            let x = encode_inputs(table, mask, &state.stats, rows);
            Ok(sample_latent(&model.encoder, &model.store, &x, tau, &mut **rng_cell.borrow_mut())?)
        },
        |p| sample(p, &mut **rng_cell.borrow_mut()),
    )
}

/// Outcome of the label-prediction protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub target: usize,
    /// Rows whose label stayed visible during training.
    pub visible_rows: Vec<usize>,
    /// `(row, predicted, truth)` for held-out rows with a known label.
    pub predictions: Vec<(usize, usize, usize)>,
    pub accuracy_error: f64,
    /// Error of always predicting the most frequent visible label.
    pub majority_error: f64,
}

/// Hides the target label on a random `1 − train_fraction` share of rows,
/// trains on everything still observed, and predicts the hidden labels by MAP
/// imputation. Exactly `⌈N · train_fraction⌉` rows keep their label.
pub fn predict_target<R: Rng + ?Sized>(
    table: &HeterogeneousTable,
    mask: &MissingMask,
    target: usize,
    train_fraction: f64,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<PredictionReport, ImputationError> {
    check_mask(table, mask)?;
    let spec = table.schema().columns().get(target).ok_or(ImputationError::NoSuchColumn(target))?;
    if spec.kind != ColumnKind::Categorical {
        return Err(ImputationError::NotCategorical { column: spec.name.clone(), kind: spec.kind.as_str() });
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ImputationError::TrainFraction(train_fraction));
    }
    let n = table.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let visible = ((n as f64) * train_fraction).ceil() as usize;
    let (shown, hidden) = order.split_at(visible.min(n));
    let mut train_mask = mask.clone();
    for &r in hidden {
        train_mask.set(r, target, false);
    }

    let state = train(table, &train_mask, config)?;
    let result = impute_map(&state, table, &train_mask)?;

    let mut counts = vec![0usize; spec.cardinality];
    for &r in shown.iter().filter(|&&r| mask.is_observed(r, target)) {
        counts[table.class(r, target)] += 1;
    }
    let majority = majority_class(&counts);

    let mut hidden_sorted = hidden.to_vec();
    hidden_sorted.sort_unstable();
    let predictions: Vec<(usize, usize, usize)> = hidden_sorted
        .iter()
        .filter(|&&r| mask.is_observed(r, target))
        .map(|&r| (r, result.completed.class(r, target), table.class(r, target)))
        .collect();
    if predictions.is_empty() {
        return Err(ImputationError::NoLabels);
    }
    let truth: Vec<f64> = predictions.iter().map(|p| p.2 as f64).collect();
    let predicted: Vec<f64> = predictions.iter().map(|p| p.1 as f64).collect();
    let majority_guess = vec![majority as f64; truth.len()];
    let mut visible_rows = shown.to_vec();
    visible_rows.sort_unstable();
    Ok(PredictionReport {
        target,
        visible_rows,
        accuracy_error: accuracy_error(&truth, &predicted).value,
        majority_error: accuracy_error(&truth, &majority_guess).value,
        predictions,
    })
}

/// Most frequent class; ties go to the lowest index.
pub(crate) fn majority_class(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, c) in counts.iter().enumerate() {
        if *c > counts[best] {
            best = i;
        }
    }
    best
}
