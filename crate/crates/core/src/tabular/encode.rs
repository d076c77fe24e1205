//! Batch normalization statistics and the zero-filled encoder input.

use serde::{Deserialize, Serialize};

use super::{ColumnKind, HeterogeneousTable, MissingMask, Schema};
use crate::compute::Tensor;

/// Lower bound on a fitted scale; constant columns get this instead of 0.
pub const SCALE_FLOOR: f64 = 1e-3;

/// Which transform the statistics apply to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatsDomain {
    /// Raw values (real columns).
    Raw,
    /// `ln x` (positive real columns).
    Log,
    /// `ln(1 + x)` (count columns).
    Log1p,
}

impl StatsDomain {
    pub fn for_kind(kind: ColumnKind) -> Option<Self> {
        match kind {
            ColumnKind::Real => Some(Self::Raw),
            ColumnKind::PositiveReal => Some(Self::Log),
            ColumnKind::Count => Some(Self::Log1p),
            ColumnKind::Categorical | ColumnKind::Ordinal => None,
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Raw => x,
            Self::Log => x.ln(),
            Self::Log1p => x.ln_1p(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub shift: f64,
    pub scale: f64,
    pub domain: StatsDomain,
}

impl ColumnStats {
    pub fn normalize(&self, x: f64) -> f64 {
        (self.domain.apply(x) - self.shift) / self.scale
    }
}

/// Shift/scale per numeric column; `None` for nominal columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    columns: Vec<Option<ColumnStats>>,
}

impl NormalizationStats {
    /// Shift 0 and scale 1 in each column's domain; used when normalization is off.
    pub fn identity(schema: &Schema) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| StatsDomain::for_kind(c.kind).map(|domain| ColumnStats { shift: 0.0, scale: 1.0, domain }))
            .collect();
        Self { columns }
    }

    pub fn from_columns(columns: Vec<Option<ColumnStats>>) -> Self {
        Self { columns }
    }

    pub fn column(&self, d: usize) -> Option<&ColumnStats> {
        self.columns[d].as_ref()
    }

    pub fn columns(&self) -> &[Option<ColumnStats>] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Mean and population standard deviation of the observed cells of each numeric
/// column over `batch_rows`, in the column's domain. Columns with no observed
/// cell fall back to `(0, 1)`; scales are floored at [`SCALE_FLOOR`].
pub fn fit_normalization(table: &HeterogeneousTable, mask: &MissingMask, batch_rows: &[usize]) -> NormalizationStats {
    assert!(!batch_rows.is_empty(), "fit_normalization needs at least one row");
    let columns = table
        .schema()
        .columns()
        .iter()
        .enumerate()
        .map(|(d, spec)| {
            let domain = StatsDomain::for_kind(spec.kind)?;
            let values: Vec<f64> = batch_rows
                .iter()
                .filter(|&&n| mask.is_observed(n, d))
                .map(|&n| domain.apply(table.get(n, d)))
                .collect();
            if values.is_empty() {
                return Some(ColumnStats { shift: 0.0, scale: 1.0, domain });
            }
            let count = values.len() as f64;
            let mean = values.iter().sum::<f64>() / count;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
            Some(ColumnStats { shift: mean, scale: var.sqrt().max(SCALE_FLOOR), domain })
        })
        .collect();
    NormalizationStats { columns }
}

/// Slot offsets of each column in the encoder input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodingLayout {
    slots: Vec<(usize, usize)>,
    width: usize,
}

impl EncodingLayout {
    /// Numeric columns take one slot; nominal columns take `R` slots.
    pub fn new(schema: &Schema) -> Self {
        let mut offset = 0;
        let slots = schema
            .columns()
            .iter()
            .map(|c| {
                let w = if c.kind.is_numeric() { 1 } else { c.cardinality };
                let s = (offset, w);
                offset += w;
                s
            })
            .collect();
        Self { slots, width: offset }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn columns(&self) -> usize {
        self.slots.len()
    }

    /// `(offset, width)` of column `d`.
    pub fn slots(&self, d: usize) -> (usize, usize) {
        self.slots[d]
    }
}

/// Encoder inputs for a batch of rows, one row per object.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedBatch {
    pub values: Tensor,
    pub layout: EncodingLayout,
    /// Row-major `rows × D` observed flags of the encoded rows.
    pub observed: Vec<bool>,
}

impl EncodedBatch {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn width(&self) -> usize {
        self.values.cols()
    }

    pub fn attributes(&self) -> usize {
        self.layout.columns()
    }

    pub fn is_observed(&self, r: usize, d: usize) -> bool {
        self.observed[r * self.attributes() + d]
    }

    /// `rows × D` tensor of 0/1 observed indicators.
    pub fn observed_tensor(&self) -> Tensor {
        let d = self.attributes();
        let data = self.observed.iter().map(|o| if *o { 1.0 } else { 0.0 }).collect();
        Tensor::new(self.rows(), d, data).expect("observed shape")
    }

    /// Slots of column `d` in row `r`.
    pub fn column_slots(&self, r: usize, d: usize) -> &[f64] {
        let (off, w) = self.layout.slots(d);
        &self.values.row_slice(r)[off..off + w]
    }

    /// Recovers a class index from one-hot or thermometer slots; `None` for an all-zero block.
    pub fn decode_class(kind: ColumnKind, slots: &[f64]) -> Option<usize> {
        match kind {
            ColumnKind::Categorical => slots.iter().position(|v| *v == 1.0),
            ColumnKind::Ordinal => slots.iter().rposition(|v| *v == 1.0),
            _ => None,
        }
    }
}

/// Builds `x̃` for `rows`: normalized numeric slots, one-hot categorical and
/// thermometer ordinal slots, with every missing cell contributing zeros.
pub fn encode_inputs(
    table: &HeterogeneousTable,
    mask: &MissingMask,
    stats: &NormalizationStats,
    rows: &[usize],
) -> EncodedBatch {
    let schema = table.schema();
    let layout = EncodingLayout::new(schema);
    let width = layout.width();
    let mut data = vec![0.0; rows.len() * width];
    for (r, &n) in rows.iter().enumerate() {
        let out = &mut data[r * width..(r + 1) * width];
        for (d, spec) in schema.columns().iter().enumerate() {
            if !mask.is_observed(n, d) {
                continue;
            }
            let (off, _) = layout.slots(d);
            let x = table.get(n, d);
            match spec.kind {
                ColumnKind::Real | ColumnKind::PositiveReal | ColumnKind::Count => {
                    let st = stats.column(d).expect("stats cover every numeric column");
                    out[off] = st.normalize(x);
                }
                ColumnKind::Categorical => out[off + x as usize] = 1.0,
                ColumnKind::Ordinal => out[off..=off + x as usize].iter_mut().for_each(|v| *v = 1.0),
            }
        }
    }
    let values = Tensor::new(rows.len(), width, data).expect("encoded shape");
    let observed = rows.iter().flat_map(|&n| mask.row(n).iter().copied()).collect();
    EncodedBatch { values, layout, observed }
}
