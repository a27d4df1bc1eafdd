// SPDX-License-Identifier: Apache-2.0

//! CSV load and save.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::serial::fmt_f64;

/// How label cells become label indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMapping {
    /// Dense indices in order of first appearance; names kept.
    #[default]
    FirstAppearance,
    /// Cells are already label indices `0..K`.
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    /// Header name, or a zero-based column index when `has_header` is false.
    pub label_column: String,
    #[serde(default)]
    pub weight_column: Option<String>,
    #[serde(default = "comma")]
    pub delimiter: char,
    #[serde(default = "yes")]
    pub has_header: bool,
    #[serde(default)]
    pub label_mapping: LabelMapping,
    /// Label count for integer mapping; defaults to `max label + 1`.
    #[serde(default)]
    pub n_labels: Option<usize>,
}

fn comma() -> char {
    ','
}

fn yes() -> bool {
    true
}

impl CsvSchema {
    pub fn new(label_column: &str) -> Self {
        Self {
            label_column: label_column.to_string(),
            weight_column: None,
            delimiter: ',',
            has_header: true,
            label_mapping: LabelMapping::FirstAppearance,
            n_labels: None,
        }
    }

    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::InvalidArgument(format!("delimiter {:?} is not a single ASCII byte", self.delimiter)))
    }
}

fn parse_err(path: &Path, line: usize, column: &str, message: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        column: column.to_string(),
        message,
    }
}

/// Raw string table: header (synthesized `c0..` when absent) and records.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// 1-based file line of each row, for messages.
    pub lines: Vec<usize>,
}

pub fn read_raw(path: &Path, delimiter: char, has_header: bool) -> Result<RawTable> {
    let mut schema = CsvSchema::new("");
    schema.delimiter = delimiter;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let mut header: Vec<String> = if has_header {
        rdr.headers()?.iter().map(str::to_string).collect()
    } else {
        Vec::new()
    };
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if header.is_empty() {
            header = (0..rec.len()).map(|j| format!("c{j}")).collect();
        }
        rows.push(rec.iter().map(str::to_string).collect());
        lines.push(line);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "", "no data rows".into()));
    }
    Ok(RawTable { header, rows, lines })
}

fn find_column(path: &Path, table: &RawTable, name: &str, has_header: bool) -> Result<usize> {
    if has_header {
        table
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(path, 1, name, "column not found in header".into()))
    } else {
        name.parse::<usize>()
            .ok()
            .filter(|&j| j < table.header.len())
            .ok_or_else(|| parse_err(path, 1, name, "expected a column index (no header)".into()))
    }
}

/// Maps label strings to indices; returns `(labels, names, K)`.
pub(crate) fn map_labels(
    path: &Path,
    cells: &[(&str, usize)],
    mapping: LabelMapping,
    n_labels: Option<usize>,
    column: &str,
) -> Result<(Vec<usize>, Option<Vec<String>>, usize)> {
    match mapping {
        LabelMapping::FirstAppearance => {
            let mut index: HashMap<&str, usize> = HashMap::new();
            let mut names = Vec::new();
            let labels = cells
                .iter()
                .map(|&(s, _)| {
                    *index.entry(s).or_insert_with(|| {
                        names.push(s.to_string());
                        names.len() - 1
                    })
                })
                .collect();
            let k = n_labels.unwrap_or(names.len()).max(names.len());
            Ok((labels, Some(names), k))
        }
        LabelMapping::Integer => {
            let labels = cells
                .iter()
                .map(|&(s, line)| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(path, line, column, format!("label {s:?} is not a non-negative integer")))
                })
                .collect::<Result<Vec<_>>>()?;
            let max = labels.iter().copied().max().unwrap_or(0);
            let k = n_labels.unwrap_or(max + 1);
            if max >= k {
                return Err(parse_err(path, 0, column, format!("label {max} but n_labels = {k}")));
            }
            Ok((labels, None, k))
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_raw(path, schema.delimiter, schema.has_header)?;
    let label_col = find_column(path, &table, &schema.label_column, schema.has_header)?;
    let weight_col = schema
        .weight_column
        .as_deref()
        .map(|w| find_column(path, &table, w, schema.has_header))
        .transpose()?;
    let feature_cols: Vec<usize> = (0..table.header.len())
        .filter(|&j| j != label_col && Some(j) != weight_col)
        .collect();

    let mut data = Vec::with_capacity(table.rows.len() * feature_cols.len());
    let mut weights = Vec::new();
    let mut label_cells = Vec::with_capacity(table.rows.len());
    for (row, &line) in table.rows.iter().zip(&table.lines) {
        if row.len() != table.header.len() {
            return Err(parse_err(
                path,
                line,
                "",
                format!("expected {} fields, found {}", table.header.len(), row.len()),
            ));
        }
        for &j in &feature_cols {
            let v: f64 = row[j]
                .parse()
                .map_err(|_| parse_err(path, line, &table.header[j], format!("non-numeric value {:?}", row[j])))?;
            data.push(v);
        }
        if let Some(j) = weight_col {
            let w: f64 = row[j]
                .parse()
                .map_err(|_| parse_err(path, line, &table.header[j], format!("non-numeric weight {:?}", row[j])))?;
            if !(w >= 0.0 && w.is_finite()) {
                return Err(parse_err(path, line, &table.header[j], format!("weight {w} is negative or not finite")));
            }
            weights.push(w);
        }
        label_cells.push((row[label_col].as_str(), line));
    }
    let (labels, names, k) = map_labels(
        path,
        &label_cells,
        schema.label_mapping,
        schema.n_labels,
        &table.header[label_col],
    )?;
    let x = Matrix::new(table.rows.len(), feature_cols.len(), data)?;
    let mut ds = Dataset::new(x, labels, k)?
        .with_feature_names(feature_cols.iter().map(|&j| table.header[j].clone()).collect())?;
    if let Some(names) = names {
        let mut names = names;
        while names.len() < k {
            names.push(format!("label{}", names.len()));
        }
        ds = ds.with_label_names(names)?;
    }
    if weight_col.is_some() {
        ds = ds.with_weights(weights)?;
    }
    Ok(ds)
}

/// Writes a header row then one row per sample. Labels are written as their
/// names when the dataset has them, otherwise as indices; reals carry 17
/// significant digits. The weight column appears only when weights exist.
pub fn save_csv(data: &Dataset, path: impl AsRef<Path>, schema: &CsvSchema) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(schema.delimiter_byte()?)
        .from_path(path)?;
    let mut header: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.dim()).map(|j| format!("x{j}")).collect(),
    };
    header.push(schema.label_column.clone());
    if data.weights().is_some() {
        header.push(schema.weight_column.clone().unwrap_or_else(|| "weight".into()));
    }
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.x(i).iter().map(|&v| fmt_f64(v)).collect();
        let y = data.labels()[i];
        rec.push(match data.label_names() {
            Some(n) => n[y].clone(),
            None => y.to_string(),
        });
        if let Some(ws) = data.weights() {
            rec.push(fmt_f64(ws[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
