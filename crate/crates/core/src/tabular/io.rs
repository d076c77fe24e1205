use std::fs;
use std::io::Write;
use std::path::Path;

use super::{ColumnKind, ColumnSpec, HeterogeneousTable, MissingMask, Schema, TabularError};

fn read_text(path: &Path) -> Result<String, TabularError> {
    fs::read_to_string(path).map_err(|source| TabularError::Io { path: path.display().to_string(), source })
}

fn csv_records(text: &str) -> Result<Vec<Vec<String>>, TabularError> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()).map_err(|e| TabularError::Csv(e.to_string())))
        .collect()
}

/// Parses a types file: one `name,kind[,cardinality]` line per column.
pub fn parse_types(text: &str) -> Result<Schema, TabularError> {
    let mut columns = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(TabularError::BadType {
                line: line_no,
                reason: format!("expected `name,kind,cardinality`, got `{line}`"),
            });
        }
        let kind = ColumnKind::parse(fields[1])
            .ok_or_else(|| TabularError::UnknownKind { line: line_no, kind: fields[1].to_owned() })?;
        let cardinality = match fields.get(2) {
            None | Some(&"") => 0,
            Some(c) => c.parse::<usize>().map_err(|_| TabularError::BadType {
                line: line_no,
                reason: format!("cardinality `{c}` is not a nonnegative integer"),
            })?,
        };
        let spec = ColumnSpec::new(fields[0], kind, cardinality)
            .map_err(|reason| TabularError::BadType { line: line_no, reason })?;
        columns.push(spec);
    }
    Schema::new(columns)
}

/// Parses data rows; empty fields become missing cells stored as 0.
pub fn read_data(text: &str, schema: &Schema) -> Result<(HeterogeneousTable, MissingMask), TabularError> {
    let cols = schema.len();
    let records = csv_records(text)?;
    let mut cells = Vec::with_capacity(records.len() * cols);
    let mut observed = Vec::with_capacity(records.len() * cols);
    for (n, rec) in records.iter().enumerate() {
        if rec.len() != cols {
            return Err(TabularError::Ragged { row: n, expected: cols, found: rec.len() });
        }
        for (d, field) in rec.iter().enumerate() {
            if field.is_empty() {
                cells.push(0.0);
                observed.push(false);
                continue;
            }
            let spec = schema.column(d);
            let value: f64 = field.parse().map_err(|_| TabularError::InvalidCell {
                row: n,
                col: d,
                name: spec.name.clone(),
                reason: format!("`{field}` is not a number"),
            })?;
            cells.push(value);
            observed.push(true);
        }
    }
    let mask = MissingMask::from_flags(records.len(), cols, observed);
    let table = HeterogeneousTable::new(schema.clone(), records.len(), cells, &mask)?;
    Ok((table, mask))
}

/// Parses a 0/1 mask matrix of the given shape.
pub fn parse_mask(text: &str, rows: usize, cols: usize) -> Result<MissingMask, TabularError> {
    let records = csv_records(text)?;
    if records.len() != rows {
        return Err(TabularError::MaskShape {
            rows,
            cols,
            mask_rows: records.len(),
            mask_cols: records.first().map_or(0, Vec::len),
        });
    }
    let mut observed = Vec::with_capacity(rows * cols);
    for (n, rec) in records.iter().enumerate() {
        if rec.len() != cols {
            return Err(TabularError::MaskShape { rows, cols, mask_rows: rows, mask_cols: rec.len() });
        }
        for (d, f) in rec.iter().enumerate() {
            match f.as_str() {
                "1" => observed.push(true),
                "0" => observed.push(false),
                other => {
                    return Err(TabularError::InvalidMask {
                        row: n,
                        col: d,
                        reason: format!("expected 0 or 1, got `{other}`"),
                    })
                }
            }
        }
    }
    Ok(MissingMask::from_flags(rows, cols, observed))
}

/// Loads a dataset. Without a mask file, empty cells are missing; with one,
/// the mask decides and every cell it marks observed must hold a value.
pub fn load_dataset(
    data_file: &Path,
    types_file: &Path,
    mask_file: Option<&Path>,
) -> Result<(HeterogeneousTable, MissingMask), TabularError> {
    let schema = parse_types(&read_text(types_file)?)?;
    let (table, empty_mask) = read_data(&read_text(data_file)?, &schema)?;
    let Some(mask_path) = mask_file else {
        return Ok((table, empty_mask));
    };
    let mask = parse_mask(&read_text(mask_path)?, table.rows(), table.cols())?;
    for n in 0..table.rows() {
        for d in 0..table.cols() {
            if mask.is_observed(n, d) && !empty_mask.is_observed(n, d) {
                return Err(TabularError::InvalidMask {
                    row: n,
                    col: d,
                    reason: "marked observed but the data cell is empty".into(),
                });
            }
        }
    }
    Ok((table, mask))
}

fn format_cell(kind: ColumnKind, v: f64) -> String {
    match kind {
        ColumnKind::Real | ColumnKind::PositiveReal => format!("{v}"),
        _ => format!("{}", v as i64),
    }
}

/// Writes the table in the loader's dialect. Cells the mask marks missing are
/// left empty; without a mask every cell is written.
pub fn write_csv<W: Write>(out: &mut W, table: &HeterogeneousTable, mask: Option<&MissingMask>) -> std::io::Result<()> {
    let schema = table.schema();
    for n in 0..table.rows() {
        let line: Vec<String> = (0..table.cols())
            .map(|d| match mask {
                Some(m) if !m.is_observed(n, d) => String::new(),
                _ => format_cell(schema.column(d).kind, table.get(n, d)),
            })
            .collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_mask<W: Write>(out: &mut W, mask: &MissingMask) -> std::io::Result<()> {
    for n in 0..mask.rows() {
        let line: Vec<&str> = mask.row(n).iter().map(|o| if *o { "1" } else { "0" }).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
