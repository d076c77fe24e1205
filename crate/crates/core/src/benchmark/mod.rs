//! MCAR masks, per-type imputation errors, the mean/mode baseline and the
//! missing-rate sweep.

mod metrics;
pub mod synthetic;

pub use metrics::{
    accuracy_error, column_range, displacement_error, evaluate, nrmse, ColumnError, Metric, MetricValue, MetricsReport,
};

use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imputation::{
    check_mask, impute_map, impute_sample, majority_class, FillMethod, FillRecord, ImputationError, ImputationResult,
};
use crate::tabular::{ColumnKind, HeterogeneousTable, MissingMask};
use crate::training::{train, TrainConfig};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("missing fraction must lie in [0, 1), got {0}")]
    Fraction(f64),
    #[error("column {column} has zero range; NRMSE is undefined")]
    ZeroRange { column: String },
    #[error("unknown method `{0}` (expected hivae_map, hivae_sample or mean_mode)")]
    UnknownMethod(String),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Imputation(#[from] ImputationError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    HivaeMap,
    HivaeSample,
    MeanMode,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::HivaeMap, Method::HivaeSample, Method::MeanMode];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::HivaeMap => "hivae_map",
            Self::HivaeSample => "hivae_sample",
            Self::MeanMode => "mean_mode",
        }
    }
}

impl FromStr for Method {
    type Err = BenchmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| BenchmarkError::UnknownMethod(s.to_string()))
    }
}

/// Masks each cell independently with probability `fraction`.
pub fn generate_mcar_mask(table: &HeterogeneousTable, fraction: f64, seed: u64) -> Result<MissingMask, BenchmarkError> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(BenchmarkError::Fraction(fraction));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = table.rows() * table.cols();
    let observed = (0..cells).map(|_| rng.random::<f64>() >= fraction).collect();
    Ok(MissingMask::from_flags(table.rows(), table.cols(), observed))
}

/// Fills numeric cells with the observed column mean (count columns rounded
/// half-up) and nominal cells with the most frequent observed class (ties to
/// the lowest index).
pub fn mean_mode_impute(table: &HeterogeneousTable, mask: &MissingMask) -> Result<ImputationResult, ImputationError> {
    check_mask(table, mask)?;
    let mut completed = table.clone();
    let mut fill_values = Vec::with_capacity(table.cols());
    for (d, spec) in table.schema().columns().iter().enumerate() {
        let observed: Vec<usize> = (0..table.rows()).filter(|&n| mask.is_observed(n, d)).collect();
        if observed.is_empty() {
            return Err(ImputationError::EmptyColumn { column: spec.name.clone() });
        }
        let value = match spec.kind {
            ColumnKind::Real | ColumnKind::PositiveReal | ColumnKind::Count => {
                // summing in sorted order makes the mean independent of row order
                let mut values: Vec<f64> = observed.iter().map(|&n| table.get(n, d)).collect();
                values.sort_by(f64::total_cmp);
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                if spec.kind == ColumnKind::Count {
                    (mean + 0.5).floor()
                } else {
                    mean
                }
            }
            ColumnKind::Categorical | ColumnKind::Ordinal => {
                let mut counts = vec![0usize; spec.cardinality];
                observed.iter().for_each(|&n| counts[table.class(n, d)] += 1);
                majority_class(&counts) as f64
            }
        };
        fill_values.push(value);
    }
    let mut fills = Vec::new();
    for n in 0..table.rows() {
        for d in mask.missing_set(n) {
            let value = fill_values[d];
            completed.set(n, d, value).expect("means and modes of valid cells are valid");
            fills.push(FillRecord { row: n, col: d, value, params: None, method: FillMethod::MeanMode });
        }
    }
    Ok(ImputationResult { completed, fills })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub fractions: Vec<f64>,
    pub repeats: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Model settings; its seed is replaced per grid cell.
    pub train: TrainConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            repeats: 10,
            methods: Method::ALL.to_vec(),
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

/// Seed of grid cell `index` derived from the master seed.
pub fn cell_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

fn run_cell(
    table: &HeterogeneousTable,
    truth_observed: &MissingMask,
    config: &BenchmarkConfig,
    fraction: f64,
    repeat: usize,
    seed: u64,
) -> Result<Vec<MetricsReport>, BenchmarkError> {
    let mask = generate_mcar_mask(table, fraction, seed)?.intersect(truth_observed);
    let has_targets = (0..table.rows())
        .any(|n| (0..table.cols()).any(|d| truth_observed.is_observed(n, d) && !mask.is_observed(n, d)));
    let needs_model = has_targets && config.methods.iter().any(|m| *m != Method::MeanMode);
    let state = if needs_model {
        let train_config = TrainConfig { seed, ..config.train.clone() };
        Some(train(table, &mask, &train_config).map_err(ImputationError::from)?)
    } else {
        None
    };
    config
        .methods
        .iter()
        .map(|&method| {
            let completed = match (method, &state) {
                (Method::MeanMode, _) => mean_mode_impute(table, &mask)?.completed,
                (Method::HivaeMap, Some(s)) => impute_map(s, table, &mask)?.completed,
                (Method::HivaeSample, Some(s)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5A5A_5A5A);
                    impute_sample(s, table, &mask, &mut rng)?.completed
                }
                // nothing was hidden, so there is nothing to score
                (_, None) => table.clone(),
            };
            evaluate(table, &completed, truth_observed, &mask, method.as_str(), fraction, repeat, seed)
        })
        .collect()
}

/// Runs every `(fraction, repeat)` cell of the grid with a fresh MCAR mask and
/// scores each method on the masked cells. Cells run in parallel; reports are
/// ordered by fraction, then repeat, then method.
pub fn run_benchmark(
    table: &HeterogeneousTable,
    truth_observed: &MissingMask,
    config: &BenchmarkConfig,
) -> Result<Vec<MetricsReport>, BenchmarkError> {
    check_mask(table, truth_observed)?;
    if let Some(f) = config.fractions.iter().find(|f| !(0.0..1.0).contains(*f)) {
        return Err(BenchmarkError::Fraction(*f));
    }
    let cells: Vec<(usize, usize)> =
        (0..config.fractions.len()).flat_map(|f| (0..config.repeats).map(move |r| (f, r))).collect();
    let results: Vec<Result<Vec<MetricsReport>, BenchmarkError>> = cells
        .par_iter()
        .map(|&(f, r)| {
            let seed = cell_seed(config.seed, (f * config.repeats + r) as u64);
            run_cell(table, truth_observed, config, config.fractions[f], r, seed)
        })
        .collect();
    let mut reports = Vec::new();
    for r in results {
        reports.extend(r?);
    }
    Ok(reports)
}

/// Mean and population standard deviation of AvgErr per method and fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub fraction: f64,
    pub avg_err_mean: f64,
    pub avg_err_std: f64,
    pub numeric_err_mean: Option<f64>,
    pub nominal_err_mean: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(reports: &[MetricsReport]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in reports {
        if !keys.iter().any(|(m, f)| *m == r.method && *f == r.fraction) {
            keys.push((r.method.clone(), r.fraction));
        }
    }
    keys.into_iter()
        .map(|(method, fraction)| {
            let group: Vec<&MetricsReport> =
                reports.iter().filter(|r| r.method == method && r.fraction == fraction).collect();
            let avg: Vec<f64> = group.iter().map(|r| r.avg_err).collect();
            let (avg_err_mean, avg_err_std) = mean_std(&avg);
            let opt_mean = |get: fn(&MetricsReport) -> Option<f64>| {
                let v: Vec<f64> = group.iter().filter_map(|r| get(r)).collect();
                (!v.is_empty()).then(|| mean_std(&v).0)
            };
            SummaryRow {
                method,
                fraction,
                avg_err_mean,
                avg_err_std,
                numeric_err_mean: opt_mean(|r| r.numeric_err),
                nominal_err_mean: opt_mean(|r| r.nominal_err),
            }
        })
        .collect()
}

/// Fixed-width text table of [`summarize`] output.
pub fn render_summary(rows: &[SummaryRow]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:>8} {:>10} {:>10} {:>10} {:>10}",
        "method", "fraction", "avg_err", "std", "numeric", "nominal"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<14} {:>8.2} {:>10.4} {:>10.4} {:>10} {:>10}",
            r.method,
            r.fraction,
            r.avg_err_mean,
            r.avg_err_std,
            fmt(r.numeric_err_mean),
            fmt(r.nominal_err_mean)
        );
    }
    out
}
