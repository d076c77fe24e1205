use serde::{Deserialize, Serialize};

use super::BenchmarkError;
use crate::tabular::{ColumnKind, HeterogeneousTable, MissingMask};

/// Error of one column, possibly over an empty evaluation set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    /// Number of cells scored.
    pub cells: usize,
}

impl MetricValue {
    /// `true` when nothing was scored and the value is the defined 0.
    pub fn is_empty(&self) -> bool {
        self.cells == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Nrmse,
    Accuracy,
    Displacement,
}

impl Metric {
    pub fn for_kind(kind: ColumnKind) -> Self {
        match kind {
            ColumnKind::Real | ColumnKind::PositiveReal | ColumnKind::Count => Self::Nrmse,
            ColumnKind::Categorical => Self::Accuracy,
            ColumnKind::Ordinal => Self::Displacement,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Nrmse => "nrmse",
            Self::Accuracy => "accuracy",
            Self::Displacement => "displacement",
        }
    }
}

/// Root mean squared error divided by `range = max − min` of the full true column.
pub fn nrmse(truth: &[f64], imputed: &[f64], range: f64) -> Result<MetricValue, BenchmarkError> {
    assert_eq!(truth.len(), imputed.len(), "nrmse inputs differ in length");
    if range.is_nan() || range <= 0.0 {
        return Err(BenchmarkError::ZeroRange { column: String::new() });
    }
    if truth.is_empty() {
        return Ok(MetricValue { value: 0.0, cells: 0 });
    }
    let mse = truth.iter().zip(imputed).map(|(t, i)| (t - i).powi(2)).sum::<f64>() / truth.len() as f64;
    Ok(MetricValue { value: mse.sqrt() / range, cells: truth.len() })
}

/// Share of mismatched classes.
pub fn accuracy_error(truth: &[f64], imputed: &[f64]) -> MetricValue {
    assert_eq!(truth.len(), imputed.len(), "accuracy inputs differ in length");
    if truth.is_empty() {
        return MetricValue { value: 0.0, cells: 0 };
    }
    let wrong = truth.iter().zip(imputed).filter(|(t, i)| t != i).count();
    MetricValue { value: wrong as f64 / truth.len() as f64, cells: truth.len() }
}

/// Mean of `|x − x̂| / R` over class indices.
pub fn displacement_error(truth: &[f64], imputed: &[f64], cardinality: usize) -> MetricValue {
    assert_eq!(truth.len(), imputed.len(), "displacement inputs differ in length");
    if truth.is_empty() {
        return MetricValue { value: 0.0, cells: 0 };
    }
    let r = cardinality as f64;
    let total: f64 = truth.iter().zip(imputed).map(|(t, i)| ((t - i) / r).abs()).sum();
    MetricValue { value: total / truth.len() as f64, cells: truth.len() }
}

/// `max − min` over the cells of column `d` that `observed` marks.
pub fn column_range(table: &HeterogeneousTable, observed: &MissingMask, d: usize) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for n in (0..table.rows()).filter(|&n| observed.is_observed(n, d)) {
        let v = table.get(n, d);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnError {
    pub name: String,
    pub kind: ColumnKind,
    pub metric: Metric,
    pub error: f64,
    pub cells: usize,
}

/// Scores of one method on one incomplete copy of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub fraction: f64,
    pub repeat: usize,
    pub seed: u64,
    pub columns: Vec<ColumnError>,
    /// Unweighted mean of the per-column errors.
    pub avg_err: f64,
    /// Mean error over real, positive and count columns.
    pub numeric_err: Option<f64>,
    /// Mean error over categorical and ordinal columns.
    pub nominal_err: Option<f64>,
    /// Set when some column had no cell to score.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl MetricsReport {
    pub fn evaluated_cells(&self) -> usize {
        self.columns.iter().map(|c| c.cells).sum()
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Scores `imputed` against `truth` on the cells that `truth_observed` knows
/// and `mask` hid: exactly the artificially removed cells.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    truth: &HeterogeneousTable,
    imputed: &HeterogeneousTable,
    truth_observed: &MissingMask,
    mask: &MissingMask,
    method: &str,
    fraction: f64,
    repeat: usize,
    seed: u64,
) -> Result<MetricsReport, BenchmarkError> {
    let schema = truth.schema();
    if imputed.schema() != schema || imputed.rows() != truth.rows() {
        return Err(BenchmarkError::Shape("imputed table does not match the truth table".into()));
    }
    for m in [truth_observed, mask] {
        if (m.rows(), m.cols()) != (truth.rows(), truth.cols()) {
            return Err(BenchmarkError::Shape("mask does not match the truth table".into()));
        }
    }
    let mut columns = Vec::with_capacity(schema.len());
    let mut empty = Vec::new();
    for (d, spec) in schema.columns().iter().enumerate() {
        let cells: Vec<usize> =
            (0..truth.rows()).filter(|&n| truth_observed.is_observed(n, d) && !mask.is_observed(n, d)).collect();
        debug_assert!(cells.iter().all(|&n| !mask.is_observed(n, d)));
        let t: Vec<f64> = cells.iter().map(|&n| truth.get(n, d)).collect();
        let i: Vec<f64> = cells.iter().map(|&n| imputed.get(n, d)).collect();
        let metric = Metric::for_kind(spec.kind);
        let value = match metric {
            Metric::Nrmse => {
                let range = column_range(truth, truth_observed, d);
                if cells.is_empty() {
                    MetricValue { value: 0.0, cells: 0 }
                } else {
                    nrmse(&t, &i, range).map_err(|_| BenchmarkError::ZeroRange { column: spec.name.clone() })?
                }
            }
            Metric::Accuracy => accuracy_error(&t, &i),
            Metric::Displacement => displacement_error(&t, &i, spec.cardinality),
        };
        if value.is_empty() {
            empty.push(spec.name.clone());
        }
        columns.push(ColumnError {
            name: spec.name.clone(),
            kind: spec.kind,
            metric,
            error: value.value,
            cells: value.cells,
        });
    }
    let all: Vec<f64> = columns.iter().map(|c| c.error).collect();
    let numeric: Vec<f64> = columns.iter().filter(|c| c.kind.is_numeric()).map(|c| c.error).collect();
    let nominal: Vec<f64> = columns.iter().filter(|c| c.kind.is_nominal()).map(|c| c.error).collect();
    let warning = (!empty.is_empty()).then(|| format!("no masked cells to score in: {}", empty.join(", ")));
    Ok(MetricsReport {
        method: method.to_string(),
        fraction,
        repeat,
        seed,
        avg_err: mean(&all).unwrap_or(0.0),
        numeric_err: mean(&numeric),
        nominal_err: mean(&nominal),
        columns,
        warning,
    })
}
