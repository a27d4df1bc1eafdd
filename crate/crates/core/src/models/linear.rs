// SPDX-License-Identifier: Apache-2.0

//! Multinomial logistic regression trained by weighted maximum likelihood.

use crate::dataset::Matrix;
use crate::error::Result;
use crate::models::optim::{gradient_descent, FitInfo};
use crate::models::{MarginForm, ModelSpec};
use crate::transfer::WeightedTrainingSet;

/// `w_k · x + b_k` for each label `k`, with `theta` laid out `K x (d + 1)`.
pub fn scores(theta: &[f64], k: usize, x: &[f64]) -> Vec<f64> {
    let stride = x.len() + 1;
    (0..k)
        .map(|c| {
            let row = &theta[c * stride..(c + 1) * stride];
            row[..x.len()].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[x.len()]
        })
        .collect()
}

pub fn log_softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    s.iter().map(|v| v - lse).collect()
}

/// Softmax, renormalized so the row sums to one to machine precision.
pub fn softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Per-column affine rescaling to zero mean and unit variance.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let (n, d) = (x.rows() as f64, x.cols());
        let mut mean = vec![0.0; d];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in x.iter_rows() {
            for j in 0..d {
                var[j] += (r[j] - mean[j]).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 1e-12 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }

    /// Maps `K x (d + 1)` coefficients fitted on standardized inputs back to
    /// the original feature space.
    pub fn unstandardize(&self, theta: &[f64], k: usize) -> Vec<f64> {
        let d = self.mean.len();
        let mut out = theta.to_vec();
        for c in 0..k {
            let row = &mut out[c * (d + 1)..(c + 1) * (d + 1)];
            let mut shift = 0.0;
            for j in 0..d {
                row[j] /= self.scale[j];
                shift += row[j] * self.mean[j];
            }
            row[d] -= shift;
        }
        out
    }
}

/// Rows grouped by base sample: `(label, weight)` pairs.
pub(crate) fn group_rows(set: &WeightedTrainingSet) -> Vec<Vec<(usize, f64)>> {
    let mut g = vec![Vec::new(); set.base().len()];
    for r in set.rows() {
        g[r.sample].push((r.label, r.weight));
    }
    g
}

/// Weighted negative log-likelihood of a linear softmax model, optionally
/// with the binary margin term.
///
/// Without a margin the value is `Σ_rows w·(-log p(y|x)) / Σ w`; with one it
/// is `(1/m) [Σ_rows w·(-log p(y|x)) + Σ_i 2 e^{-2 |log p(0|x_i) - log p(1|x_i)|}]`.
pub struct SoftmaxObjective<'a> {
    x: &'a Matrix,
    groups: Vec<Vec<(usize, f64)>>,
    k: usize,
    norm: f64,
    margin: bool,
}

impl<'a> SoftmaxObjective<'a> {
    /// `x` must have one row per base sample of `set`.
    pub fn new(x: &'a Matrix, set: &WeightedTrainingSet, margin: bool) -> Self {
        let norm = if margin {
            set.base().len() as f64
        } else {
            set.total_weight()
        };
        Self {
            x,
            groups: group_rows(set),
            k: set.base().n_labels(),
            norm,
            margin,
        }
    }

    pub fn n_params(&self) -> usize {
        self.k * (self.x.cols() + 1)
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut g = vec![0.0; theta.len()];
        self.value_and_gradient(theta, &mut g)
    }

    pub fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let d = self.x.cols();
        let k = self.k;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        let mut dlogit = vec![0.0; k];
        for (i, rows) in self.groups.iter().enumerate() {
            if rows.is_empty() && !self.margin {
                continue;
            }
            let x = self.x.row(i);
            let s = scores(theta, k, x);
            let logp = log_softmax(&s);
            dlogit.iter_mut().for_each(|v| *v = 0.0);
            for &(y, w) in rows {
                if w == 0.0 {
                    continue;
                }
                total -= w * logp[y];
                for c in 0..k {
                    dlogit[c] += w * (logp[c].exp() - f64::from(u8::from(c == y)));
                }
            }
            if self.margin {
                let z = s[0] - s[1];
                let e = (-2.0 * z.abs()).exp();
                total += 2.0 * e;
                let dz = -4.0 * e * z.signum() * f64::from(u8::from(z != 0.0));
                dlogit[0] += dz;
                dlogit[1] -= dz;
            }
            for c in 0..k {
                let gc = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
                for j in 0..d {
                    gc[j] += dlogit[c] * x[j];
                }
                gc[d] += dlogit[c];
            }
        }
        grad.iter_mut().for_each(|g| *g /= self.norm);
        total / self.norm
    }
}

pub(crate) fn fit(
    spec: &ModelSpec,
    set: &WeightedTrainingSet,
    margin: Option<MarginForm>,
) -> Result<(Vec<f64>, FitInfo)> {
    let base = set.base();
    let std = Standardizer::fit(base.features());
    let xs = std.apply(base.features());
    let obj = SoftmaxObjective::new(&xs, set, matches!(margin, Some(MarginForm::Mle)));
    let mut theta = vec![0.0; obj.n_params()];
    let info = gradient_descent(&mut theta, spec.gd_config(), |t, g| obj.value_and_gradient(t, g));
    Ok((std.unstandardize(&theta, base.n_labels()), info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax(&[1000.0, 999.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let lp = log_softmax(&[0.0, 0.0]);
        assert!((lp[0] - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn unstandardize_preserves_scores() {
        let x = Matrix::from_rows(&[vec![1.0, 10.0], vec![3.0, -2.0], vec![0.5, 4.0]]).unwrap();
        let st = Standardizer::fit(&x);
        let xs = st.apply(&x);
        let theta = vec![0.3, -0.7, 0.2, 1.1, 0.4, -0.9];
        let back = st.unstandardize(&theta, 2);
        for i in 0..3 {
            let a = scores(&theta, 2, xs.row(i));
            let b = scores(&back, 2, x.row(i));
            for c in 0..2 {
                assert!((a[c] - b[c]).abs() < 1e-12);
            }
        }
    }
}
