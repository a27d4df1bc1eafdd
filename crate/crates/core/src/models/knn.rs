// SPDX-License-Identifier: Apache-2.0

//! Brute-force k-nearest-neighbors with Laplace-smoothed vote fractions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transfer::WeightedTrainingSet;

/// Stored training rows. Zero-weight rows are dropped at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnIndex {
    dim: usize,
    points: Vec<f64>,
    labels: Vec<usize>,
    weights: Vec<f64>,
}

impl KnnIndex {
    pub fn fit(set: &WeightedTrainingSet) -> Result<Self> {
        let base = set.base();
        let dim = base.dim();
        let mut points = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        for r in set.rows().iter().filter(|r| r.weight > 0.0) {
            points.extend_from_slice(base.x(r.sample));
            labels.push(r.label);
            weights.push(r.weight);
        }
        if labels.is_empty() {
            return Err(Error::Training("knn: no rows with positive weight".into()));
        }
        Ok(Self {
            dim,
            points,
            labels,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Indices of the `k` nearest stored rows, ordered by (distance, index).
    pub fn neighbors(&self, x: &[f64], k: usize) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..self.len())
            .map(|i| {
                let p = &self.points[i * self.dim..(i + 1) * self.dim];
                (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i)
            })
            .collect();
        let k = k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k, cmp);
            d.truncate(k);
        }
        d.sort_unstable_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// `(v_y + 1) / (k + K)` where `v_y` is the weight share of label `y`
    /// among the neighbors, scaled to `k` votes. With unit weights `v_y` is
    /// the plain neighbor count.
    pub fn confidence(&self, x: &[f64], k: usize, n_labels: usize) -> Vec<f64> {
        let nb = self.neighbors(x, k);
        let k_eff = nb.len() as f64;
        let mut w = vec![0.0; n_labels];
        for &i in &nb {
            w[self.labels[i]] += self.weights[i];
        }
        let total: f64 = w.iter().sum();
        let denom = k_eff + n_labels as f64;
        let mut out: Vec<f64> = w.iter().map(|wy| (wy * k_eff / total + 1.0) / denom).collect();
        // rows must sum to one; absorb rounding into the largest entry
        let s: f64 = out.iter().sum();
        let top = crate::dataset::argmax(&out);
        out[top] += 1.0 - s;
        out
    }
}
