// SPDX-License-Identifier: Apache-2.0

//! Special-value feature expansion for credit-bureau style tables.
//!
//! Cells hold ordinary numbers or the integer codes −9 (no record), −7 and
//! −8 (two kinds of "not applicable"). Rows made entirely of −9 are dropped;
//! every remaining column `c` becomes `(c_is7, c_is8, c_value)`.

use std::collections::BTreeSet;
use std::path::Path;

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::io::table::{map_labels, RawTable};
use crate::io::LabelMapping;

#[derive(Debug, Clone, PartialEq)]
pub struct FicoExpansion {
    pub dataset: Dataset,
    /// Rows removed because every feature cell was −9.
    pub dropped_rows: usize,
    /// Kept rows with some but not all −9 cells; their −9s are ordinary values.
    pub mixed_minus9_rows: usize,
    /// Columns treated as categorical and one-hot encoded.
    pub categorical_columns: Vec<String>,
}

/// The three-column code of one numeric cell.
pub fn expand_value(v: f64) -> [f64; 3] {
    if v == -7.0 {
        [1.0, 0.0, 0.0]
    } else if v == -8.0 {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, v]
    }
}

fn is_minus9(cell: &str) -> bool {
    cell.parse::<f64>().is_ok_and(|v| v == -9.0)
}

enum Column {
    Numeric { name: String, src: usize },
    /// One-hot over lexicographically ordered tokens.
    Categorical { name: String, src: usize, tokens: Vec<String> },
}

impl Column {
    fn width(&self) -> usize {
        match self {
            Column::Numeric { .. } => 1,
            Column::Categorical { tokens, .. } => tokens.len(),
        }
    }
}

/// Expands `table`; `label_column` is excluded from the features and mapped
/// with `mapping`.
pub fn fico_expand(table: &RawTable, label_column: &str, mapping: LabelMapping) -> Result<FicoExpansion> {
    let path = Path::new("<table>");
    let label_col = table
        .header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::InvalidArgument(format!("label column `{label_column}` not found")))?;
    let feature_cols: Vec<usize> = (0..table.header.len()).filter(|&j| j != label_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::InvalidArgument("no feature columns".into()));
    }
    for (r, &line) in table.rows.iter().zip(&table.lines) {
        if r.len() != table.header.len() {
            return Err(Error::InvalidArgument(format!(
                "line {line}: expected {} fields, found {}",
                table.header.len(),
                r.len()
            )));
        }
    }

    let mut kept = Vec::new();
    let mut dropped = 0;
    let mut mixed = 0;
    for (i, r) in table.rows.iter().enumerate() {
        let n9 = feature_cols.iter().filter(|&&j| is_minus9(&r[j])).count();
        if n9 == feature_cols.len() {
            dropped += 1;
            continue;
        }
        if n9 > 0 {
            mixed += 1;
        }
        kept.push(i);
    }
    if mixed > 0 {
        log::warn!("{mixed} rows mix −9 with other values; −9 kept as an ordinary value there");
    }
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let columns: Vec<Column> = feature_cols
        .iter()
        .map(|&j| {
            let name = table.header[j].clone();
            if kept.iter().all(|&i| table.rows[i][j].parse::<f64>().is_ok()) {
                Column::Numeric { name, src: j }
            } else {
                let tokens: BTreeSet<&str> = kept.iter().map(|&i| table.rows[i][j].as_str()).collect();
                Column::Categorical {
                    name,
                    src: j,
                    tokens: tokens.into_iter().map(str::to_string).collect(),
                }
            }
        })
        .collect();

    let width: usize = columns.iter().map(Column::width).sum();
    let mut names = Vec::with_capacity(3 * width);
    for c in &columns {
        let base: Vec<String> = match c {
            Column::Numeric { name, .. } => vec![name.clone()],
            Column::Categorical { name, tokens, .. } => tokens.iter().map(|t| format!("{name}={t}")).collect(),
        };
        for b in base {
            names.extend([format!("{b}_is7"), format!("{b}_is8"), format!("{b}_value")]);
        }
    }

    let mut data = Vec::with_capacity(kept.len() * 3 * width);
    for &i in &kept {
        let r = &table.rows[i];
        for c in &columns {
            match c {
                Column::Numeric { src, .. } => {
                    let v: f64 = r[*src].parse().expect("checked numeric");
                    data.extend(expand_value(v));
                }
                Column::Categorical { src, tokens, .. } => {
                    for t in tokens {
                        data.extend(expand_value(if *t == r[*src] { 1.0 } else { 0.0 }));
                    }
                }
            }
        }
    }
    let cells: Vec<(&str, usize)> = kept
        .iter()
        .map(|&i| (table.rows[i][label_col].as_str(), table.lines[i]))
        .collect();
    let (labels, label_names, k) = map_labels(path, &cells, mapping, None, label_column)?;
    let mut ds = Dataset::new(Matrix::new(kept.len(), 3 * width, data)?, labels, k)?.with_feature_names(names)?;
    if let Some(n) = label_names {
        ds = ds.with_label_names(n)?;
    }
    Ok(FicoExpansion {
        dataset: ds,
        dropped_rows: dropped,
        mixed_minus9_rows: mixed,
        categorical_columns: columns
            .iter()
            .filter_map(|c| match c {
                Column::Categorical { name, .. } => Some(name.clone()),
                Column::Numeric { .. } => None,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(expand_value(-7.0), [1.0, 0.0, 0.0]);
        assert_eq!(expand_value(-8.0), [0.0, 1.0, 0.0]);
        assert_eq!(expand_value(42.0), [0.0, 0.0, 42.0]);
        assert_eq!(expand_value(-9.0), [0.0, 0.0, -9.0]);
    }
}
