// SPDX-License-Identifier: Apache-2.0

//! Bagged CART trees with per-split feature subsampling.

use rand::Rng as _;

use crate::error::Result;
use crate::models::tree::{self, Tree, TreeConfig};
use crate::models::ModelSpec;
use crate::rng;
use crate::transfer::WeightedTrainingSet;

pub(crate) fn fit(spec: &ModelSpec, set: &WeightedTrainingSet, seed: u64) -> Result<Vec<Tree>> {
    let d = set.base().dim();
    let mf = spec.get_usize("max_features");
    let cfg = TreeConfig {
        max_depth: spec.get_usize("max_depth"),
        min_samples_leaf: spec.get_usize("min_samples_leaf"),
        max_features: if mf == 0 {
            ((d as f64).sqrt().floor() as usize).max(1)
        } else {
            mf.min(d)
        },
    };
    let n_rows = set.rows().len();
    (0..spec.get_usize("n_trees"))
        .map(|t| {
            let mut r = rng::substream(seed, t as u64);
            // bootstrap over rows; a draw with no positive weight falls back to all rows
            let idx: Vec<usize> = (0..n_rows).map(|_| r.random_range(0..n_rows)).collect();
            if idx.iter().any(|&i| set.rows()[i].weight > 0.0) {
                tree::fit_on(set, &idx, &cfg, &mut r)
            } else {
                tree::fit(set, &cfg, &mut r)
            }
        })
        .collect()
}

/// `(votes_y + 1) / (T + K)` over the trees' hard predictions.
pub(crate) fn confidence(trees: &[Tree], k: usize, x: &[f64]) -> Vec<f64> {
    let mut votes = vec![0.0; k];
    for t in trees {
        votes[crate::dataset::argmax(t.leaf(x))] += 1.0;
    }
    let denom = trees.len() as f64 + k as f64;
    let mut out: Vec<f64> = votes.iter().map(|v| (v + 1.0) / denom).collect();
    let s: f64 = out.iter().sum();
    let top = crate::dataset::argmax(&out);
    out[top] += 1.0 - s;
    out
}
