// SPDX-License-Identifier: Apache-2.0

//! Full-batch gradient descent with a fixed step.

use serde::{Deserialize, Serialize};

/// How an iterative fit ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdConfig {
    pub learning_rate: f64,
    pub max_iter: usize,
    pub tol: f64,
}

/// Minimizes `f` starting at `theta`. `f` writes the (sub)gradient into its
/// second argument and returns the objective value.
///
/// Stops when the gradient norm drops below `tol` or after `max_iter` steps.
/// Non-convergence is reported in the returned [`FitInfo`], never hidden.
pub fn gradient_descent<F>(theta: &mut [f64], cfg: GdConfig, mut f: F) -> FitInfo
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let mut grad = vec![0.0; theta.len()];
    let mut value = f(theta, &mut grad);
    let mut norm = l2(&grad);
    let mut it = 0;
    while it < cfg.max_iter {
        if norm < cfg.tol {
            return FitInfo {
                iterations: it,
                converged: true,
                grad_norm: norm,
                objective: value,
            };
        }
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= cfg.learning_rate * g;
        }
        value = f(theta, &mut grad);
        norm = l2(&grad);
        it += 1;
    }
    FitInfo {
        iterations: it,
        converged: norm < cfg.tol,
        grad_norm: norm,
        objective: value,
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_converges() {
        let mut th = vec![3.0, -2.0];
        let info = gradient_descent(
            &mut th,
            GdConfig {
                learning_rate: 0.25,
                max_iter: 10_000,
                tol: 1e-10,
            },
            |t, g| {
                g[0] = 2.0 * (t[0] - 1.0);
                g[1] = 4.0 * (t[1] + 0.5);
                (t[0] - 1.0).powi(2) + 2.0 * (t[1] + 0.5).powi(2)
            },
        );
        assert!(info.converged);
        assert!((th[0] - 1.0).abs() < 1e-9 && (th[1] + 0.5).abs() < 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let mut th = vec![1.0];
        let info = gradient_descent(
            &mut th,
            GdConfig {
                learning_rate: 1e-6,
                max_iter: 3,
                tol: 1e-12,
            },
            |t, g| {
                g[0] = 2.0 * t[0];
                t[0] * t[0]
            },
        );
        assert!(!info.converged);
        assert_eq!(info.iterations, 3);
    }
}
