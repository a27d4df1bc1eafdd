// SPDX-License-Identifier: Apache-2.0

//! CART classification tree grown on weighted Gini impurity.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::rng::Rng;
use crate::transfer::WeightedTrainingSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        /// Smoothed label frequencies.
        dist: Vec<f64>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { dist } => return dist,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeConfig {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; all of them when `>= d`.
    pub max_features: usize,
}

impl TreeConfig {
    pub fn from_spec(spec: &ModelSpec, dim: usize) -> Self {
        Self {
            max_depth: spec.get_usize("max_depth"),
            min_samples_leaf: spec.get_usize("min_samples_leaf"),
            max_features: dim,
        }
    }
}

/// A training row as seen by the tree builder.
#[derive(Clone, Copy)]
struct Row {
    sample: usize,
    label: usize,
    weight: f64,
}

struct Builder<'a> {
    set: &'a WeightedTrainingSet,
    k: usize,
    cfg: TreeConfig,
    nodes: Vec<Node>,
}

/// Fits one tree. `rng` only matters when `cfg.max_features < d`.
pub(crate) fn fit(set: &WeightedTrainingSet, cfg: &TreeConfig, rng: &mut Rng) -> Result<Tree> {
    let rows: Vec<Row> = set
        .rows()
        .iter()
        .filter(|r| r.weight > 0.0)
        .map(|r| Row {
            sample: r.sample,
            label: r.label,
            weight: r.weight,
        })
        .collect();
    fit_rows(set, rows, cfg, rng)
}

/// Fits one tree on an explicit (e.g. bootstrapped) list of row indices into `set.rows()`.
pub(crate) fn fit_on(set: &WeightedTrainingSet, idx: &[usize], cfg: &TreeConfig, rng: &mut Rng) -> Result<Tree> {
    let rows: Vec<Row> = idx
        .iter()
        .map(|&i| set.rows()[i])
        .filter(|r| r.weight > 0.0)
        .map(|r| Row {
            sample: r.sample,
            label: r.label,
            weight: r.weight,
        })
        .collect();
    fit_rows(set, rows, cfg, rng)
}

fn fit_rows(set: &WeightedTrainingSet, rows: Vec<Row>, cfg: &TreeConfig, rng: &mut Rng) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::Training("decision tree: no rows with positive weight".into()));
    }
    let mut b = Builder {
        set,
        k: set.base().n_labels(),
        cfg: *cfg,
        nodes: Vec::new(),
    };
    b.grow(rows, 0, rng);
    Ok(Tree { nodes: b.nodes })
}

fn gini_mass(w: &[f64]) -> f64 {
    // W * (1 - Σ p²) = W - Σ w² / W
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    total - w.iter().map(|v| v * v).sum::<f64>() / total
}

impl Builder<'_> {
    fn leaf_dist(&self, rows: &[Row]) -> Vec<f64> {
        let mut w = vec![0.0; self.k];
        for r in rows {
            w[r.label] += r.weight;
        }
        let total: f64 = w.iter().sum();
        let n = rows.len() as f64;
        let denom = n + self.k as f64;
        // Laplace smoothing on weighted frequencies, scaled to the row count
        let mut dist: Vec<f64> = w.iter().map(|wy| (n * wy / total + 1.0) / denom).collect();
        let s: f64 = dist.iter().sum();
        let top = crate::dataset::argmax(&dist);
        dist[top] += 1.0 - s;
        dist
    }

    fn grow(&mut self, rows: Vec<Row>, depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { dist: Vec::new() });
        let split = if depth < self.cfg.max_depth && rows.len() >= 2 * self.cfg.min_samples_leaf {
            self.best_split(&rows, rng)
        } else {
            None
        };
        match split {
            None => {
                self.nodes[id] = Node::Leaf {
                    dist: self.leaf_dist(&rows),
                };
            }
            Some((feature, threshold)) => {
                let base = self.set.base();
                let (l, r): (Vec<Row>, Vec<Row>) =
                    rows.into_iter().partition(|row| base.x(row.sample)[feature] <= threshold);
                let left = self.grow(l, depth + 1, rng);
                let right = self.grow(r, depth + 1, rng);
                self.nodes[id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
            }
        }
        id
    }

    /// Best `(feature, threshold)` by weighted Gini decrease; `None` when no
    /// split improves on the parent. Ties keep the first candidate found.
    fn best_split(&self, rows: &[Row], rng: &mut Rng) -> Option<(usize, f64)> {
        let base = self.set.base();
        let d = base.dim();
        let mut parent = vec![0.0; self.k];
        for r in rows {
            parent[r.label] += r.weight;
        }
        let parent_imp = gini_mass(&parent);
        if parent_imp <= 1e-12 * parent.iter().sum::<f64>() {
            return None;
        }
        let features: Vec<usize> = if self.cfg.max_features >= d {
            (0..d).collect()
        } else {
            let mut f = sample(rng, d, self.cfg.max_features).into_vec();
            f.sort_unstable();
            f
        };
        let min_leaf = self.cfg.min_samples_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<(f64, usize, f64)> = Vec::with_capacity(rows.len());
        for &j in &features {
            order.clear();
            order.extend(rows.iter().map(|r| (base.x(r.sample)[j], r.label, r.weight)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0.0; self.k];
            let mut right = parent.clone();
            for i in 0..order.len() - 1 {
                let (v, y, w) = order[i];
                left[y] += w;
                right[y] -= w;
                let next = order[i + 1].0;
                if next <= v || i + 1 < min_leaf || order.len() - i - 1 < min_leaf {
                    continue;
                }
                let imp = gini_mass(&left) + gini_mass(&right.iter().map(|x| x.max(0.0)).collect::<Vec<_>>());
                if best.is_none_or(|(b, _, _)| imp < b - 1e-12) {
                    best = Some((imp, j, 0.5 * (v + next)));
                }
            }
        }
        match best {
            Some((imp, j, t)) if imp < parent_imp - 1e-12 => Some((j, t)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Matrix};
    use crate::rng;

    fn set(xs: &[f64], ys: &[usize], w: Option<Vec<f64>>) -> WeightedTrainingSet {
        let x = Matrix::new(xs.len(), 1, xs.to_vec()).unwrap();
        let mut d = Dataset::new(x, ys.to_vec(), 2).unwrap();
        if let Some(w) = w {
            d = d.with_weights(w).unwrap();
        }
        WeightedTrainingSet::from_dataset(&d).unwrap()
    }

    fn cfg(depth: usize) -> TreeConfig {
        TreeConfig {
            max_depth: depth,
            min_samples_leaf: 1,
            max_features: 1,
        }
    }

    #[test]
    fn splits_separable_line() {
        let s = set(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1], None);
        let t = fit(&s, &cfg(3), &mut rng::rng(0)).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.leaf(&[0.5]), &[3.0 / 4.0, 1.0 / 4.0]);
        assert_eq!(t.leaf(&[2.5]), &[1.0 / 4.0, 3.0 / 4.0]);
    }

    #[test]
    fn weights_move_the_majority() {
        // one leaf (depth 0); weights make label 1 dominate
        let s = set(&[0.0, 1.0, 2.0], &[0, 0, 1], Some(vec![1.0, 1.0, 5.0]));
        let t = fit(&s, &cfg(0), &mut rng::rng(0)).unwrap();
        let d = t.leaf(&[0.0]);
        assert!(d[1] > d[0]);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_feature_makes_a_leaf() {
        let s = set(&[1.0, 1.0, 1.0], &[0, 1, 0], None);
        let t = fit(&s, &cfg(5), &mut rng::rng(0)).unwrap();
        assert_eq!(t.n_nodes(), 1);
    }
}
