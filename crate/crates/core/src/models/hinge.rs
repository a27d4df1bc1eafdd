// SPDX-License-Identifier: Apache-2.0

//! One-vs-rest linear hinge classifier (risk minimization).
//!
//! With per-label scores `s_k = w_k · x + b_k`, the risk of label `y` is
//!
//! ```text
//! r(y, x, θ) = (1 / 2K) Σ_k max(0, 1 - t_k s_k),   t_k = +1 if k = y else -1
//! ```
//!
//! The `1/2K` factor keeps risks inside `[0, 1]` whenever every score lies in
//! `[-1, 1]`; it does not move the argmin.

use crate::dataset::Matrix;
use crate::error::Result;
use crate::models::linear::{group_rows, scores, softmax, Standardizer};
use crate::models::optim::{gradient_descent, FitInfo};
use crate::models::{MarginForm, ModelSpec};
use crate::transfer::WeightedTrainingSet;

pub fn risks(s: &[f64]) -> Vec<f64> {
    let k = s.len();
    let scale = 1.0 / (2.0 * k as f64);
    // Σ_k max(0, 1 + s_k) is shared; swap in the positive term for y.
    let neg: Vec<f64> = s.iter().map(|v| (1.0 + v).max(0.0)).collect();
    let total_neg: f64 = neg.iter().sum();
    (0..k)
        .map(|y| scale * (total_neg - neg[y] + (1.0 - s[y]).max(0.0)))
        .collect()
}

/// `p(y|x) ∝ exp(-c · r(y, x, θ))`.
pub fn pseudo_confidence(r: &[f64], c: f64) -> Vec<f64> {
    let neg: Vec<f64> = r.iter().map(|v| -c * v).collect();
    softmax(&neg)
}

/// `log(1 + e^{-z}) + 2 e^{-2z}`.
pub fn erm_margin_f(z: f64) -> f64 {
    (-z).exp().ln_1p() + 2.0 * (-2.0 * z).exp()
}

fn erm_margin_df(z: f64) -> f64 {
    -1.0 / (1.0 + z.exp()) - 4.0 * (-2.0 * z).exp()
}

/// Weighted risk objective, optionally with the binary ERM margin term.
pub struct HingeObjective<'a> {
    x: &'a Matrix,
    groups: Vec<Vec<(usize, f64)>>,
    k: usize,
    norm: f64,
    margin_c: Option<f64>,
}

impl<'a> HingeObjective<'a> {
    pub fn new(x: &'a Matrix, set: &WeightedTrainingSet, margin_c: Option<f64>) -> Self {
        let norm = if margin_c.is_some() {
            set.base().len() as f64
        } else {
            set.total_weight()
        };
        Self {
            x,
            groups: group_rows(set),
            k: set.base().n_labels(),
            norm,
            margin_c,
        }
    }

    pub fn n_params(&self) -> usize {
        self.k * (self.x.cols() + 1)
    }

    pub fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (d, k) = (self.x.cols(), self.k);
        let scale = 1.0 / (2.0 * k as f64);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        let mut ds = vec![0.0; k];
        // d r(y) / d s_j for the current sample, row-major K x K
        let mut jac = vec![0.0; k * k];
        for (i, rows) in self.groups.iter().enumerate() {
            if rows.is_empty() && self.margin_c.is_none() {
                continue;
            }
            let x = self.x.row(i);
            let s = scores(theta, k, x);
            let r = risks(&s);
            for y in 0..k {
                for j in 0..k {
                    let t = if j == y { 1.0 } else { -1.0 };
                    jac[y * k + j] = if 1.0 - t * s[j] > 0.0 { -scale * t } else { 0.0 };
                }
            }
            ds.iter_mut().for_each(|v| *v = 0.0);
            for &(y, w) in rows {
                if w == 0.0 {
                    continue;
                }
                total += w * r[y];
                for j in 0..k {
                    ds[j] += w * jac[y * k + j];
                }
            }
            if let Some(c) = self.margin_c {
                let diff = r[0] - r[1];
                let z = c * diff.abs();
                total += erm_margin_f(z);
                let sgn = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                let outer = erm_margin_df(z) * c * sgn;
                for j in 0..k {
                    ds[j] += outer * (jac[j] - jac[k + j]);
                }
            }
            for c in 0..k {
                let gc = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
                for j in 0..d {
                    gc[j] += ds[c] * x[j];
                }
                gc[d] += ds[c];
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
    let c = match margin {
        Some(MarginForm::Erm { c }) => Some(c),
        _ => None,
    };
    let obj = HingeObjective::new(&xs, set, c);
    let mut theta = vec![0.0; obj.n_params()];
    let info = gradient_descent(&mut theta, spec.gd_config(), |t, g| obj.value_and_gradient(t, g));
    Ok((std.unstandardize(&theta, base.n_labels()), info))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risks_at_zero_scores() {
        // every hinge is 1, so r(y) = K / 2K = 1/2
        assert_eq!(risks(&[0.0, 0.0]), vec![0.5, 0.5]);
        let r = risks(&[1.0, -1.0]);
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], 1.0);
    }

    #[test]
    fn pseudo_confidence_values() {
        let p = pseudo_confidence(&[0.3, 0.3], 7.0);
        assert_eq!(p, vec![0.5, 0.5]);
        let p = pseudo_confidence(&[0.0, 1.0], 1.0);
        assert!((p[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((p[1] - 0.268_941_421_369_995_1).abs() < 1e-12);
    }

    #[test]
    fn margin_f_values() {
        assert!((erm_margin_f(0.0) - (2f64.ln() + 2.0)).abs() < 1e-15);
        assert!(erm_margin_f(50.0) < 1e-20);
        let h = 1e-6;
        for z in [0.1, 0.7, 2.0] {
            let fd = (erm_margin_f(z + h) - erm_margin_f(z - h)) / (2.0 * h);
            assert!((fd - erm_margin_df(z)).abs() < 1e-8);
        }
    }
}
