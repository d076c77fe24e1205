//! Typed-column data model: schema, cell storage, missingness masks, loading,
//! and the zero-filled normalized encoder input.

mod encode;
mod io;

pub use encode::{
    encode_inputs, fit_normalization, ColumnStats, EncodedBatch, EncodingLayout, NormalizationStats, StatsDomain,
    SCALE_FLOOR,
};
pub use io::{load_dataset, parse_mask, parse_types, read_data, write_csv, write_mask};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("types file line {line}: unknown kind `{kind}` (expected real, pos, count, cat or ordinal)")]
    UnknownKind { line: usize, kind: String },
    #[error("types file line {line}: {reason}")]
    BadType { line: usize, reason: String },
    #[error("schema must have at least one column")]
    EmptySchema,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {col} (`{name}`): {reason}")]
    InvalidCell { row: usize, col: usize, name: String, reason: String },
    #[error("mask row {row}, column {col}: {reason}")]
    InvalidMask { row: usize, col: usize, reason: String },
    #[error("mask shape {mask_rows}x{mask_cols} does not match table {rows}x{cols}")]
    MaskShape { rows: usize, cols: usize, mask_rows: usize, mask_cols: usize },
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    #[serde(rename = "real")]
    Real,
    #[serde(rename = "pos")]
    PositiveReal,
    #[serde(rename = "count")]
    Count,
    #[serde(rename = "cat")]
    Categorical,
    #[serde(rename = "ordinal")]
    Ordinal,
}

impl ColumnKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Some(Self::Real),
            "pos" => Some(Self::PositiveReal),
            "count" => Some(Self::Count),
            "cat" => Some(Self::Categorical),
            "ordinal" => Some(Self::Ordinal),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Real => "real",
            Self::PositiveReal => "pos",
            Self::Count => "count",
            Self::Categorical => "cat",
            Self::Ordinal => "ordinal",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Self::Real | Self::PositiveReal | Self::Count)
    }

    pub fn is_nominal(self) -> bool {
        !self.is_numeric()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Number of classes for nominal columns, 0 for numeric ones.
    pub cardinality: usize,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind, cardinality: usize) -> Result<Self, String> {
        let name = name.into();
        if kind.is_nominal() && cardinality < 2 {
            return Err(format!("column `{name}`: {} needs cardinality >= 2", kind.as_str()));
        }
        if kind.is_numeric() && cardinality != 0 {
            return Err(format!("column `{name}`: {} takes no cardinality", kind.as_str()));
        }
        Ok(Self { name, kind, cardinality })
    }

    pub fn real(name: &str) -> Self {
        Self::new(name, ColumnKind::Real, 0).unwrap()
    }

    pub fn positive(name: &str) -> Self {
        Self::new(name, ColumnKind::PositiveReal, 0).unwrap()
    }

    pub fn count(name: &str) -> Self {
        Self::new(name, ColumnKind::Count, 0).unwrap()
    }

    pub fn categorical(name: &str, classes: usize) -> Self {
        Self::new(name, ColumnKind::Categorical, classes).unwrap()
    }

    pub fn ordinal(name: &str, classes: usize) -> Self {
        Self::new(name, ColumnKind::Ordinal, classes).unwrap()
    }

    /// Checks a stored value against the column kind.
    pub fn validate(&self, v: f64) -> Result<(), String> {
        if !v.is_finite() {
            return Err(format!("value {v} is not finite"));
        }
        match self.kind {
            ColumnKind::Real => Ok(()),
            ColumnKind::PositiveReal if v > 0.0 => Ok(()),
            ColumnKind::PositiveReal => Err(format!("positive real value must be > 0, got {v}")),
            ColumnKind::Count if v >= 0.0 && v.fract() == 0.0 => Ok(()),
            ColumnKind::Count => Err(format!("count value must be a nonnegative integer, got {v}")),
            ColumnKind::Categorical | ColumnKind::Ordinal => {
                if v >= 0.0 && v.fract() == 0.0 && (v as usize) < self.cardinality {
                    Ok(())
                } else {
                    Err(format!("class index must be in 0..{}, got {v}", self.cardinality - 1))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self, TabularError> {
        if columns.is_empty() {
            return Err(TabularError::EmptySchema);
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(TabularError::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn column(&self, d: usize) -> &ColumnSpec {
        &self.columns[d]
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Canonical types-file rendering, one `name,kind,cardinality` line per column.
    pub fn to_types_text(&self) -> String {
        self.columns.iter().map(|c| format!("{},{},{}\n", c.name, c.kind.as_str(), c.cardinality)).collect()
    }

    /// Hex SHA-256 of the canonical types text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_types_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-cell observed flags; `true` means observed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MissingMask {
    rows: usize,
    cols: usize,
    observed: Vec<bool>,
}

impl MissingMask {
    pub fn all_observed(rows: usize, cols: usize) -> Self {
        Self { rows, cols, observed: vec![true; rows * cols] }
    }

    pub fn from_flags(rows: usize, cols: usize, observed: Vec<bool>) -> Self {
        assert_eq!(observed.len(), rows * cols, "mask size");
        Self { rows, cols, observed }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_observed(&self, n: usize, d: usize) -> bool {
        self.observed[n * self.cols + d]
    }

    pub fn set(&mut self, n: usize, d: usize, observed: bool) {
        self.observed[n * self.cols + d] = observed;
    }

    pub fn row(&self, n: usize) -> &[bool] {
        &self.observed[n * self.cols..(n + 1) * self.cols]
    }

    /// Indices of observed attributes of row `n`.
    pub fn observed_set(&self, n: usize) -> Vec<usize> {
        (0..self.cols).filter(|&d| self.is_observed(n, d)).collect()
    }

    /// Indices of missing attributes of row `n`.
    pub fn missing_set(&self, n: usize) -> Vec<usize> {
        (0..self.cols).filter(|&d| !self.is_observed(n, d)).collect()
    }

    pub fn count_missing(&self) -> usize {
        self.observed.iter().filter(|o| !**o).count()
    }

    /// Cellwise AND: observed only where both masks observe.
    pub fn intersect(&self, other: &MissingMask) -> MissingMask {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "mask shapes differ");
        let observed = self.observed.iter().zip(&other.observed).map(|(a, b)| *a && *b).collect();
        Self { rows: self.rows, cols: self.cols, observed }
    }

    pub fn flags(&self) -> &[bool] {
        &self.observed
    }
}

/// `N × D` cell storage. Nominal cells hold class indices as exact integers.
/// Cells marked missing hold arbitrary values that are only read through a mask.
#[derive(Clone, Debug, PartialEq)]
pub struct HeterogeneousTable {
    schema: Schema,
    rows: usize,
    cells: Vec<f64>,
}

impl HeterogeneousTable {
    /// Builds a table, validating every cell the mask marks observed.
    pub fn new(schema: Schema, rows: usize, cells: Vec<f64>, mask: &MissingMask) -> Result<Self, TabularError> {
        let cols = schema.len();
        assert_eq!(cells.len(), rows * cols, "cell count");
        if (mask.rows(), mask.cols()) != (rows, cols) {
            return Err(TabularError::MaskShape { rows, cols, mask_rows: mask.rows(), mask_cols: mask.cols() });
        }
        for n in 0..rows {
            for d in 0..cols {
                if mask.is_observed(n, d) {
                    let spec = schema.column(d);
                    spec.validate(cells[n * cols + d]).map_err(|reason| TabularError::InvalidCell {
                        row: n,
                        col: d,
                        name: spec.name.clone(),
                        reason,
                    })?;
                }
            }
        }
        Ok(Self { schema, rows, cells })
    }

    /// Builds a table and mask from optional cells; `None` is missing and stored as 0.
    pub fn from_options(schema: Schema, rows: &[Vec<Option<f64>>]) -> Result<(Self, MissingMask), TabularError> {
        let cols = schema.len();
        let mut cells = Vec::with_capacity(rows.len() * cols);
        let mut observed = Vec::with_capacity(rows.len() * cols);
        for (n, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(TabularError::Ragged { row: n, expected: cols, found: row.len() });
            }
            for cell in row {
                cells.push(cell.unwrap_or(0.0));
                observed.push(cell.is_some());
            }
        }
        let mask = MissingMask::from_flags(rows.len(), cols, observed);
        let table = Self::new(schema, rows.len(), cells, &mask)?;
        Ok((table, mask))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.schema.len()
    }

    pub fn get(&self, n: usize, d: usize) -> f64 {
        self.cells[n * self.cols() + d]
    }

    /// Class index of a nominal cell.
    pub fn class(&self, n: usize, d: usize) -> usize {
        self.get(n, d) as usize
    }

    /// Overwrites a cell with a value valid for its column.
    pub fn set(&mut self, n: usize, d: usize, value: f64) -> Result<(), TabularError> {
        let spec = self.schema.column(d);
        spec.validate(value).map_err(|reason| TabularError::InvalidCell {
            row: n,
            col: d,
            name: spec.name.clone(),
            reason,
        })?;
        let cols = self.cols();
        self.cells[n * cols + d] = value;
        Ok(())
    }

    /// Overwrites a cell without validation; for cells that only the mask reads.
    pub fn set_unchecked(&mut self, n: usize, d: usize, value: f64) {
        let cols = self.cols();
        self.cells[n * cols + d] = value;
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.cells[n * self.cols()..(n + 1) * self.cols()]
    }

    pub fn column_values(&self, d: usize) -> Vec<f64> {
        (0..self.rows).map(|n| self.get(n, d)).collect()
    }

    /// Copy restricted to the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let cells = rows.iter().flat_map(|&n| self.row(n).iter().copied()).collect();
        Self { schema: self.schema.clone(), rows: rows.len(), cells }
    }
}
