// SPDX-License-Identifier: Apache-2.0

//! Datasets, confidence matrices and content hashing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on 0, and a 0-column matrix still has rows
        (0..self.rows).map(move |i| self.row(i))
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Feature matrix, labels and optional per-sample weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    n_labels: usize,
    weights: Option<Vec<f64>>,
    feature_names: Option<Vec<String>>,
    /// Original label tokens, indexed by dense label id.
    label_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, n_labels: usize) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            n_labels,
            weights: None,
            feature_names: None,
            label_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn without_weights(mut self) -> Self {
        self.weights = None;
        self
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.features.cols() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} columns",
                names.len(),
                self.features.cols()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_label_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_labels {
            return Err(Error::InvalidDataset(format!(
                "{} label names for {} labels",
                names.len(),
                self.n_labels
            )));
        }
        self.label_names = Some(names);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        if self.labels.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{} labels for {n} feature rows",
                self.labels.len()
            )));
        }
        if self.n_labels < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 labels, got {}",
                self.n_labels
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= self.n_labels) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} outside 0..{}",
                self.n_labels
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "{} weights for {n} rows",
                    w.len()
                )));
            }
            if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("weight {v} at row {i} is negative or not finite")));
            }
            if n > 0 && w.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidDataset("all weights are zero".into()));
            }
        }
        if self.features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Weight of row `i`; 1 when the dataset carries no weights.
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    /// Rows `idx` in the given order. Names and label space are kept.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_labels: self.n_labels,
            weights: self
                .weights
                .as_ref()
                .map(|w| idx.iter().map(|&i| w[i]).collect()),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// Same rows with replaced labels (used by robustness generators).
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        let mut out = self.clone();
        out.labels = labels;
        out.validate()?;
        Ok(out)
    }

    /// Same labels with replaced features.
    pub fn with_features(&self, features: Matrix) -> Result<Self> {
        if features.rows() != self.len() || features.cols() != self.dim() {
            return Err(Error::InvalidDataset("replacement feature matrix has a different shape".into()));
        }
        let mut out = self.clone();
        out.features = features;
        out.validate()?;
        Ok(out)
    }

    /// Concatenation of two datasets over the same label space and dimension.
    pub fn concat(parts: &[&Dataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyDataset)?;
        let cols = first.dim();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        let any_w = parts.iter().any(|p| p.weights.is_some());
        let mut weights = Vec::new();
        for p in parts {
            if p.dim() != cols || p.n_labels != first.n_labels {
                return Err(Error::InvalidDataset("cannot concatenate datasets of different shape".into()));
            }
            data.extend_from_slice(p.features.as_slice());
            labels.extend_from_slice(&p.labels);
            if any_w {
                weights.extend((0..p.len()).map(|i| p.weight(i)));
            }
        }
        let rows = labels.len();
        let mut ds = Dataset::new(Matrix::new(rows, cols, data)?, labels, first.n_labels)?;
        ds.feature_names = first.feature_names.clone();
        ds.label_names = first.label_names.clone();
        if any_w {
            ds = ds.with_weights(weights)?;
        }
        Ok(ds)
    }

    /// SHA-256 over shape, feature bits, labels and weights, as lowercase hex.
    ///
    /// Names are deliberately excluded: two datasets with the same numbers
    /// hash the same.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        h.update((self.n_labels as u64).to_le_bytes());
        for v in self.features.as_slice() {
            h.update(v.to_bits().to_le_bytes());
        }
        for &y in &self.labels {
            h.update((y as u64).to_le_bytes());
        }
        match &self.weights {
            Some(w) => {
                h.update([1u8]);
                for v in w {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
            None => h.update([0u8]),
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-sample label probabilities emitted by a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceMatrix {
    scores: Matrix,
    source_model_id: String,
}

/// Row-sum tolerance for confidence rows.
pub const ROW_SUM_TOL: f64 = 1e-9;

impl ConfidenceMatrix {
    pub fn new(scores: Matrix, source_model_id: impl Into<String>) -> Result<Self> {
        for (i, row) in scores.iter_rows().enumerate() {
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidConfidence(format!("row {i} has an entry outside [0, 1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidConfidence(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self {
            scores,
            source_model_id: source_model_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.scores.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.rows() == 0
    }

    pub fn n_labels(&self) -> usize {
        self.scores.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.scores.row(i)
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn source_model_id(&self) -> &str {
        &self.source_model_id
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            scores: self.scores.select_rows(idx),
            source_model_id: self.source_model_id.clone(),
        }
    }

    /// Checks that this matrix lines up with `data`.
    pub fn check_aligned(&self, data: &Dataset) -> Result<()> {
        if self.len() != data.len() {
            return Err(Error::RowMismatch {
                what: "confidence matrix",
                left: self.len(),
                right: data.len(),
            });
        }
        if self.n_labels() != data.n_labels() {
            return Err(Error::InvalidConfidence(format!(
                "{} confidence columns for {} labels",
                self.n_labels(),
                data.n_labels()
            )));
        }
        Ok(())
    }
}

/// Index of the largest entry, ties going to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry, ties going to the lowest index.
pub fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let x = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]).unwrap();
        Dataset::new(x, vec![0, 1, 0], 2).unwrap()
    }

    #[test]
    fn rejects_bad_shapes_and_weights() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(Dataset::new(x.clone(), vec![0], 2).is_err());
        assert!(Dataset::new(x.clone(), vec![0, 2], 2).is_err());
        assert!(Dataset::new(x.clone(), vec![0, 0], 1).is_err());
        let d = Dataset::new(x, vec![0, 1], 2).unwrap();
        assert!(d.clone().with_weights(vec![1.0, -0.5]).is_err());
        assert!(d.clone().with_weights(vec![0.0, 0.0]).is_err());
        assert!(d.clone().with_weights(vec![1.0]).is_err());
        assert!(d.with_weights(vec![0.0, 2.0]).is_ok());
    }

    #[test]
    fn hash_tracks_content_only() {
        let a = tiny();
        let b = tiny().with_feature_names(vec!["u".into(), "v".into()]).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        let c = a.with_labels(vec![0, 1, 1]).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
        let d = a.clone().with_weights(vec![1.0, 1.0, 1.0]).unwrap();
        assert_ne!(a.content_hash(), d.content_hash());
    }

    #[test]
    fn confidence_rows_validated() {
        let ok = Matrix::from_rows(&[vec![0.25, 0.75]]).unwrap();
        assert!(ConfidenceMatrix::new(ok, "m").is_ok());
        let bad = Matrix::from_rows(&[vec![0.5, 0.6]]).unwrap();
        assert!(ConfidenceMatrix::new(bad, "m").is_err());
        let neg = Matrix::from_rows(&[vec![-0.1, 1.1]]).unwrap();
        assert!(ConfidenceMatrix::new(neg, "m").is_err());
    }

    #[test]
    fn arg_extrema_break_ties_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.9]), 1);
        assert_eq!(argmin(&[0.3, 0.3, 0.1, 0.1]), 2);
    }
}
