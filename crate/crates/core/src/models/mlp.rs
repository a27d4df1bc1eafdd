// SPDX-License-Identifier: Apache-2.0

//! One-hidden-layer ReLU network with a softmax output, trained by
//! full-batch gradient descent on weighted cross-entropy.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::Result;
use crate::models::linear::{group_rows, log_softmax, Standardizer};
use crate::models::optim::{gradient_descent, FitInfo};
use crate::models::ModelSpec;
use crate::rng;
use crate::transfer::WeightedTrainingSet;

/// Weights in the original feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub dim: usize,
    pub hidden: usize,
    pub labels: usize,
    /// `hidden x dim`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `labels x hidden`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpParams {
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let a = self.hidden_activations(x);
        (0..self.labels)
            .map(|c| {
                self.w2[c * self.hidden..(c + 1) * self.hidden]
                    .iter()
                    .zip(&a)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
                    + self.b2[c]
            })
            .collect()
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|u| {
                let z = self.w1[u * self.dim..(u + 1) * self.dim]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
                    + self.b1[u];
                z.max(0.0)
            })
            .collect()
    }
}

struct Layout {
    d: usize,
    h: usize,
    k: usize,
}

impl Layout {
    fn len(&self) -> usize {
        self.h * self.d + self.h + self.k * self.h + self.k
    }

    fn split<'t>(&self, t: &'t [f64]) -> (&'t [f64], &'t [f64], &'t [f64], &'t [f64]) {
        let (w1, rest) = t.split_at(self.h * self.d);
        let (b1, rest) = rest.split_at(self.h);
        let (w2, b2) = rest.split_at(self.k * self.h);
        (w1, b1, w2, b2)
    }

    fn split_mut<'t>(&self, t: &'t mut [f64]) -> (&'t mut [f64], &'t mut [f64], &'t mut [f64], &'t mut [f64]) {
        let (w1, rest) = t.split_at_mut(self.h * self.d);
        let (b1, rest) = rest.split_at_mut(self.h);
        let (w2, b2) = rest.split_at_mut(self.k * self.h);
        (w1, b1, w2, b2)
    }
}

fn objective(lay: &Layout, x: &Matrix, groups: &[Vec<(usize, f64)>], norm: f64, theta: &[f64], grad: &mut [f64]) -> f64 {
    let (d, h, k) = (lay.d, lay.h, lay.k);
    let (w1, b1, w2, b2) = lay.split(theta);
    grad.iter_mut().for_each(|g| *g = 0.0);
    let (gw1, gb1, gw2, gb2) = lay.split_mut(grad);
    let mut total = 0.0;
    let mut z = vec![0.0; h];
    let mut a = vec![0.0; h];
    let mut s = vec![0.0; k];
    let mut dl = vec![0.0; k];
    let mut da = vec![0.0; h];
    for (i, rows) in groups.iter().enumerate() {
        if rows.iter().all(|&(_, w)| w == 0.0) {
            continue;
        }
        let xi = x.row(i);
        for u in 0..h {
            z[u] = w1[u * d..(u + 1) * d].iter().zip(xi).map(|(w, v)| w * v).sum::<f64>() + b1[u];
            a[u] = z[u].max(0.0);
        }
        for c in 0..k {
            s[c] = w2[c * h..(c + 1) * h].iter().zip(&a).map(|(w, v)| w * v).sum::<f64>() + b2[c];
        }
        let logp = log_softmax(&s);
        dl.iter_mut().for_each(|v| *v = 0.0);
        for &(y, w) in rows {
            if w == 0.0 {
                continue;
            }
            total -= w * logp[y];
            for c in 0..k {
                dl[c] += w * (logp[c].exp() - f64::from(u8::from(c == y)));
            }
        }
        da.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..k {
            gb2[c] += dl[c];
            let row = &mut gw2[c * h..(c + 1) * h];
            for u in 0..h {
                row[u] += dl[c] * a[u];
                da[u] += dl[c] * w2[c * h + u];
            }
        }
        for u in 0..h {
            if z[u] <= 0.0 {
                continue;
            }
            gb1[u] += da[u];
            let row = &mut gw1[u * d..(u + 1) * d];
            for j in 0..d {
                row[j] += da[u] * xi[j];
            }
        }
    }
    grad.iter_mut().for_each(|g| *g /= norm);
    total / norm
}

pub(crate) fn fit(spec: &ModelSpec, set: &WeightedTrainingSet, seed: u64) -> Result<(MlpParams, FitInfo)> {
    let base = set.base();
    let lay = Layout {
        d: base.dim(),
        h: spec.get_usize("hidden_units"),
        k: base.n_labels(),
    };
    let std = Standardizer::fit(base.features());
    let xs = std.apply(base.features());
    let groups = group_rows(set);
    let norm = set.total_weight();

    let mut theta = vec![0.0; lay.len()];
    let mut r = rng::rng(seed);
    {
        let (w1, b1, w2, b2) = lay.split_mut(&mut theta);
        let l1 = 1.0 / (lay.d.max(1) as f64).sqrt();
        let l2 = 1.0 / (lay.h as f64).sqrt();
        for v in w1.iter_mut().chain(b1.iter_mut()) {
            *v = r.random_range(-l1..=l1);
        }
        for v in w2.iter_mut().chain(b2.iter_mut()) {
            *v = r.random_range(-l2..=l2);
        }
    }
    let info = gradient_descent(&mut theta, spec.gd_config(), |t, g| objective(&lay, &xs, &groups, norm, t, g));

    // fold the standardization into the first layer
    let (w1s, b1s, w2, b2) = lay.split(&theta);
    let mut w1 = w1s.to_vec();
    let mut b1 = b1s.to_vec();
    for u in 0..lay.h {
        for j in 0..lay.d {
            w1[u * lay.d + j] /= std.scale[j];
            b1[u] -= w1[u * lay.d + j] * std.mean[j];
        }
    }
    Ok((
        MlpParams {
            dim: lay.d,
            hidden: lay.h,
            labels: lay.k,
            w1,
            b1,
            w2: w2.to_vec(),
            b2: b2.to_vec(),
        },
        info,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;

    #[test]
    fn gradient_matches_finite_differences() {
        let x = Matrix::from_rows(&[vec![0.2, -1.0], vec![1.5, 0.3], vec![-0.7, 0.9], vec![0.1, 0.1]]).unwrap();
        let ds = Dataset::new(x.clone(), vec![0, 1, 2, 1], 3)
            .unwrap()
            .with_weights(vec![1.0, 0.5, 2.0, 0.25])
            .unwrap();
        let set = WeightedTrainingSet::from_dataset(&ds).unwrap();
        let groups = group_rows(&set);
        let lay = Layout { d: 2, h: 4, k: 3 };
        let mut r = rng::rng(3);
        let theta: Vec<f64> = (0..lay.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let mut g = vec![0.0; lay.len()];
        objective(&lay, &x, &groups, set.total_weight(), &theta, &mut g);
        let mut scratch = vec![0.0; lay.len()];
        let h = 1e-6;
        for j in 0..lay.len() {
            let mut tp = theta.clone();
            tp[j] += h;
            let mut tm = theta.clone();
            tm[j] -= h;
            let fd = (objective(&lay, &x, &groups, set.total_weight(), &tp, &mut scratch)
                - objective(&lay, &x, &groups, set.total_weight(), &tm, &mut scratch))
                / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-6, "param {j}: fd {fd} vs {}", g[j]);
        }
    }
}
