// SPDX-License-Identifier: Apache-2.0

//! Exact-enumeration oracles for the squared-error bounds of the weighted
//! transfer objectives, the `erm_b` error identity, and Pinsker's inequality.
//!
//! Binary convention throughout: index 0 is the `+1` label, index 1 is `-1`.
//! Per-point TM outputs are passed as `[label 0, label 1]` pairs.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec, Params, TrainedModel};
use crate::rng;

const SUM_TOL: f64 = 1e-12;
/// Confidences fed to [`mle_rhs`] must lie in `[CONF_MIN, 1 - CONF_MIN]`.
pub const CONF_MIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPoint {
    pub x: Vec<f64>,
    pub px: f64,
    /// `(p_CM(+1|x), p_CM(-1|x))`.
    pub cm: [f64; 2],
}

/// An exactly enumerable distribution over `x` with the complex model's
/// conditional label distribution at each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDomain {
    points: Vec<DomainPoint>,
}

impl FiniteDomain {
    pub fn new(points: Vec<DomainPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDomain("no points".into()));
        }
        let dim = points[0].x.len();
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: p.x.len(),
                });
            }
            if !(p.px >= 0.0 && p.px.is_finite()) {
                return Err(Error::InvalidDomain(format!("point {i}: p(x) = {}", p.px)));
            }
            if p.cm.iter().any(|v| !(0.0..=1.0).contains(v)) || (p.cm[0] + p.cm[1] - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidDomain(format!("point {i}: confidences {:?}", p.cm)));
            }
            total += p.px;
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDomain(format!("p(x) sums to {total}")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[DomainPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].x.len()
    }

    fn check_len<T>(&self, per_point: &[T]) -> Result<()> {
        if per_point.len() != self.len() {
            return Err(Error::RowMismatch {
                what: "per-point TM outputs",
                left: self.len(),
                right: per_point.len(),
            });
        }
        Ok(())
    }
}

/// `Σ_x p(x) Σ_y p_CM(y|x) 1[pred(x) != y]` for hard predictions `pred`.
pub fn exact_error_of_predictions(domain: &FiniteDomain, pred: &[usize]) -> Result<f64> {
    domain.check_len(pred)?;
    let mut e = 0.0;
    for (p, &y_hat) in domain.points.iter().zip(pred) {
        if y_hat > 1 {
            return Err(Error::NotBinary(y_hat + 1));
        }
        e += p.px * p.cm[1 - y_hat];
    }
    Ok(e)
}

/// Exact expected 0-1 error of `tm` under `p(x) p_CM(y|x)`.
pub fn exact_error(domain: &FiniteDomain, tm: &TrainedModel) -> Result<f64> {
    if tm.n_labels != 2 {
        return Err(Error::NotBinary(tm.n_labels));
    }
    if tm.feature_dim != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: tm.feature_dim,
            actual: domain.dim(),
        });
    }
    let pred: Vec<usize> = domain.points.iter().map(|p| tm.predict_row(&p.x)).collect();
    exact_error_of_predictions(domain, &pred)
}

/// Hard prediction of a risk model: the lower risk, ties to label 0.
fn risk_prediction(r: &[f64; 2]) -> usize {
    usize::from(r[1] < r[0])
}

fn check_risks(risks: &[[f64; 2]]) -> Result<()> {
    for (i, r) in risks.iter().enumerate() {
        if r.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!("point {i}: risks {r:?} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Right-hand side of the risk-family bound:
/// `E_p(x)[c p_1 r_1 + c p_2 r_2 + log(1 + e^{-c|r_1 - r_2|}) + 2 e^{-2c|r_1 - r_2|}]`.
pub fn erm_a_rhs(domain: &FiniteDomain, risks: &[[f64; 2]], c: f64) -> Result<f64> {
    domain.check_len(risks)?;
    check_risks(risks)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    Ok(domain
        .points
        .iter()
        .zip(risks)
        .map(|(p, r)| {
            let z = c * (r[0] - r[1]).abs();
            p.px * (c * p.cm[0] * r[0] + c * p.cm[1] * r[1] + (-z).exp().ln_1p() + 2.0 * (-2.0 * z).exp())
        })
        .sum())
}

/// Right-hand side of the likelihood-family bound:
/// `E_p(x)[-p_1 log q_1 - p_2 log q_2 + 2 e^{-2|log q_2 - log q_1|}]`.
/// Confidences outside `[1e-12, 1 - 1e-12]` are rejected, not clamped.
pub fn mle_rhs(domain: &FiniteDomain, tm_conf: &[[f64; 2]]) -> Result<f64> {
    domain.check_len(tm_conf)?;
    let mut total = 0.0;
    for (i, (p, q)) in domain.points.iter().zip(tm_conf).enumerate() {
        if q.iter().any(|v| !(CONF_MIN..=1.0 - CONF_MIN).contains(v)) {
            return Err(Error::InfiniteDivergence(format!(
                "point {i}: TM confidences {q:?} outside [{CONF_MIN:e}, 1 - {CONF_MIN:e}]"
            )));
        }
        let (l1, l2) = (q[0].ln(), q[1].ln());
        total += p.px * (-p.cm[0] * l1 - p.cm[1] * l2 + 2.0 * (-2.0 * (l2 - l1).abs()).exp());
    }
    Ok(total)
}

/// Both sides of the `erm_b` error identity. `lhs` is the exact error of the
/// risk model's hard prediction; `rhs` is
/// `E_p(x)[2|1/2 - p(y')| 1[pred != y'] + 1/2 - |1/2 - p(y')|]` with
/// `y' = argmax p_CM` (ties to label 0).
///
/// The indicator is "prediction differs from `y'`", with the same tie rule
/// on both sides. This is the strict `r(y') > r(-y')` indicator whenever the
/// risks differ, and keeps the equality exact when they tie.
pub fn erm_b_identity(domain: &FiniteDomain, risks: &[[f64; 2]]) -> Result<(f64, f64)> {
    domain.check_len(risks)?;
    let pred: Vec<usize> = risks.iter().map(risk_prediction).collect();
    let lhs = exact_error_of_predictions(domain, &pred)?;
    let rhs = domain
        .points
        .iter()
        .zip(&pred)
        .map(|(p, &y_hat)| {
            let y_prime = usize::from(p.cm[1] > p.cm[0]);
            let m = (0.5 - p.cm[y_prime]).abs();
            let wrong = if y_hat != y_prime { 1.0 } else { 0.0 };
            p.px * (2.0 * m * wrong + 0.5 - m)
        })
        .sum();
    Ok((lhs, rhs))
}

/// `KL(p || q)` for binary distributions, with `0 log 0 = 0`.
pub fn kl_binary(p: [f64; 2], q: [f64; 2]) -> Result<f64> {
    for d in [p, q] {
        if d.iter().any(|v| !(0.0..=1.0).contains(v)) || (d[0] + d[1] - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidArgument(format!("{d:?} is not a distribution")));
        }
    }
    let mut kl = 0.0;
    for y in 0..2 {
        if p[y] > 0.0 {
            if q[y] == 0.0 {
                return Err(Error::InfiniteDivergence(format!("q({y}) = 0 where p({y}) = {}", p[y])));
            }
            kl += p[y] * (p[y] / q[y]).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// `(tv(p, q), sqrt(KL(p || q) / 2))`; Pinsker's inequality says the first is
/// at most the second.
pub fn pinsker_check(p: [f64; 2], q: [f64; 2]) -> Result<(f64, f64)> {
    let kl = kl_binary(p, q)?;
    Ok(((p[0] - q[0]).abs(), (kl / 2.0).sqrt()))
}

/// Softmax of `-c r`: the confidence a risk model implies.
pub fn pseudo_confidence(r: [f64; 2], c: f64) -> [f64; 2] {
    let p = crate::models::hinge::pseudo_confidence(&r, c);
    [p[0], p[1]]
}

/// `mle_rhs(pseudo-confidences) - erm_a_rhs + E_p(x)[c min(r_1, r_2)]`, which
/// the KL decomposition says is zero.
pub fn pseudo_confidence_gap(domain: &FiniteDomain, risks: &[[f64; 2]], c: f64) -> Result<f64> {
    let q: Vec<[f64; 2]> = risks.iter().map(|r| pseudo_confidence(*r, c)).collect();
    let shift: f64 = domain
        .points
        .iter()
        .zip(risks)
        .map(|(p, r)| p.px * c * r[0].min(r[1]))
        .sum();
    Ok(mle_rhs(domain, &q)? - erm_a_rhs(domain, risks, c)? + shift)
}

/// The `c` values checked by [`verify_bounds`].
pub const C_GRID: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Multiplies every right-hand side before comparison. `1` in normal use;
    /// values below one exist to exercise the violation path.
    pub rhs_scale: f64,
    pub tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            rhs_scale: 1.0,
            tolerance: 1e-12,
        }
    }
}

/// Checks on one random instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceCheck {
    pub index: usize,
    pub n_points: usize,
    pub dim: usize,
    /// Error of the risk model's hard prediction, squared bound LHS.
    pub erm_error: f64,
    /// Per `c` in [`C_GRID`]: `rhs - error²`.
    pub erm_a_slack: Vec<f64>,
    pub mle_error: f64,
    pub mle_slack: f64,
    pub identity_gap: f64,
    pub pseudo_confidence_gap: f64,
}

impl InstanceCheck {
    /// Largest `lhs - rhs` across the bound checks (negative when all hold).
    pub fn worst(&self) -> f64 {
        self.erm_a_slack
            .iter()
            .chain(std::iter::once(&self.mle_slack))
            .map(|s| -s)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub instances: usize,
    /// `max(0, max(error² - rhs))` over all bound checks.
    pub max_violation: f64,
    pub violations: usize,
    pub mean_slack_erm_a: f64,
    pub mean_slack_mle: f64,
    pub min_slack_erm_a: f64,
    pub min_slack_mle: f64,
    pub identity_max_gap: f64,
    pub pseudo_confidence_max_gap: f64,
    pub rhs_scale: f64,
    pub seed: u64,
    pub passed: bool,
    #[serde(skip)]
    pub checks: Vec<InstanceCheck>,
}

/// A random instance: domain, per-point risks in `[0, 1]`, and a random
/// binary `linear_mle` model over the domain's features.
pub fn random_instance(seed: u64, index: usize) -> (FiniteDomain, Vec<[f64; 2]>, TrainedModel) {
    let mut r = rng::substream(seed, index as u64);
    let n = r.random_range(3..=10);
    let dim = r.random_range(1..=3);
    let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let mut points: Vec<DomainPoint> = raw
        .iter()
        .map(|w| {
            let a: f64 = r.random();
            DomainPoint {
                x: (0..dim).map(|_| r.random_range(-1.0..1.0)).collect(),
                px: w / total,
                cm: [a, 1.0 - a],
            }
        })
        .collect();
    // absorb normalization rounding so the sum is 1 to the last bit we can manage
    let s: f64 = points.iter().map(|p| p.px).sum();
    points[0].px += 1.0 - s;
    let risks = (0..n).map(|_| [r.random::<f64>(), r.random::<f64>()]).collect();
    let theta: Vec<f64> = (0..2 * (dim + 1)).map(|_| r.random_range(-3.0..3.0)).collect();
    let tm = TrainedModel {
        spec: ModelSpec::new(Family::LinearMle),
        n_labels: 2,
        feature_dim: dim,
        params: Params::Linear { theta },
        fit: None,
    };
    let domain = FiniteDomain::new(points).expect("generated domain is valid");
    (domain, risks, tm)
}

/// Bound, identity and consistency checks on one instance.
pub fn check_instance(
    domain: &FiniteDomain,
    risks: &[[f64; 2]],
    tm: &TrainedModel,
    opts: &VerifyOptions,
    index: usize,
) -> Result<InstanceCheck> {
    let pred: Vec<usize> = risks.iter().map(risk_prediction).collect();
    let erm_error = exact_error_of_predictions(domain, &pred)?;
    let erm_a_slack = C_GRID
        .iter()
        .map(|&c| Ok(opts.rhs_scale * erm_a_rhs(domain, risks, c)? - erm_error * erm_error))
        .collect::<Result<Vec<_>>>()?;
    let q: Vec<[f64; 2]> = domain
        .points()
        .iter()
        .map(|p| {
            let v = tm.confidence_row(&p.x);
            [v[0], v[1]]
        })
        .collect();
    let mle_error = exact_error(domain, tm)?;
    let mle_slack = opts.rhs_scale * mle_rhs(domain, &q)? - mle_error * mle_error;
    let (lhs, rhs) = erm_b_identity(domain, risks)?;
    let pc_gap = C_GRID
        .iter()
        .map(|&c| pseudo_confidence_gap(domain, risks, c).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(InstanceCheck {
        index,
        n_points: domain.len(),
        dim: domain.dim(),
        erm_error,
        erm_a_slack,
        mle_error,
        mle_slack,
        identity_gap: (lhs - rhs).abs(),
        pseudo_confidence_gap: pc_gap,
    })
}

/// Generates `n_instances` random domains and checks every bound on each.
/// Instances are independent sub-streams of `seed` and may run in parallel;
/// the report is merged in instance order.
pub fn verify_bounds(n_instances: usize, seed: u64, opts: VerifyOptions) -> Result<BoundsReport> {
    if n_instances == 0 {
        return Err(Error::InvalidArgument("n_instances must be at least 1".into()));
    }
    let checks = (0..n_instances)
        .into_par_iter()
        .map(|i| {
            let (domain, risks, tm) = random_instance(seed, i);
            check_instance(&domain, &risks, &tm, &opts, i)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(checks, seed, opts))
}

pub fn summarize(checks: Vec<InstanceCheck>, seed: u64, opts: VerifyOptions) -> BoundsReport {
    let n = checks.len() as f64;
    let erm: Vec<f64> = checks.iter().flat_map(|c| c.erm_a_slack.iter().copied()).collect();
    let worst = checks.iter().map(InstanceCheck::worst).fold(f64::NEG_INFINITY, f64::max);
    let violations = checks
        .iter()
        .filter(|c| c.worst() > opts.tolerance)
        .count();
    let identity_max_gap = checks.iter().map(|c| c.identity_gap).fold(0.0, f64::max);
    let report = BoundsReport {
        instances: checks.len(),
        max_violation: worst.max(0.0),
        violations,
        mean_slack_erm_a: erm.iter().sum::<f64>() / erm.len() as f64,
        mean_slack_mle: checks.iter().map(|c| c.mle_slack).sum::<f64>() / n,
        min_slack_erm_a: erm.iter().copied().fold(f64::INFINITY, f64::min),
        min_slack_mle: checks.iter().map(|c| c.mle_slack).fold(f64::INFINITY, f64::min),
        identity_max_gap,
        pseudo_confidence_max_gap: checks.iter().map(|c| c.pseudo_confidence_gap).fold(0.0, f64::max),
        rhs_scale: opts.rhs_scale,
        seed,
        passed: violations == 0 && identity_max_gap <= opts.tolerance,
        checks,
    };
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize, cm: [f64; 2]) -> FiniteDomain {
        FiniteDomain::new(
            (0..n)
                .map(|i| DomainPoint {
                    x: vec![i as f64],
                    px: 1.0 / n as f64,
                    cm,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn erm_a_at_zero_risk() {
        let d = uniform(4, [0.3, 0.7]);
        let v = erm_a_rhs(&d, &[[0.0, 0.0]; 4], 1.0).unwrap();
        assert!((v - (2f64.ln() + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn mle_at_half() {
        let d = uniform(3, [0.5, 0.5]);
        let v = mle_rhs(&d, &[[0.5, 0.5]; 3]).unwrap();
        assert!((v - 2.693_147_180_559_945).abs() < 1e-12);
        assert!(mle_rhs(&d, &[[1.0, 0.0]; 3]).is_err());
    }

    #[test]
    fn symmetric_domain_error_is_half() {
        let d = uniform(5, [0.5, 0.5]);
        let (l, r) = erm_b_identity(&d, &[[0.2, 0.9]; 5]).unwrap();
        assert!((l - 0.5).abs() < 1e-15 && (r - 0.5).abs() < 1e-15);
        assert_eq!(exact_error_of_predictions(&d, &[1; 5]).unwrap(), 0.5);
    }

    #[test]
    fn identity_holds_at_ties() {
        let d = uniform(2, [0.8, 0.2]);
        let (l, r) = erm_b_identity(&d, &[[0.4, 0.4], [0.9, 0.1]]).unwrap();
        assert!((l - r).abs() < 1e-15);
    }

    #[test]
    fn pinsker_examples() {
        assert_eq!(pinsker_check([0.3, 0.7], [0.3, 0.7]).unwrap(), (0.0, 0.0));
        let (tv, b) = pinsker_check([1.0, 0.0], [0.5, 0.5]).unwrap();
        assert_eq!(tv, 0.5);
        assert!((b - (2f64.ln() / 2.0).sqrt()).abs() < 1e-15);
        assert!((b - 0.5887).abs() < 1e-4);
        assert!(matches!(pinsker_check([0.5, 0.5], [1.0, 0.0]), Err(Error::InfiniteDivergence(_))));
    }

    #[test]
    fn domain_validation() {
        let p = |px| DomainPoint {
            x: vec![0.0],
            px,
            cm: [0.5, 0.5],
        };
        assert!(FiniteDomain::new(vec![p(0.5), p(0.4)]).is_err());
        assert!(FiniteDomain::new(vec![]).is_err());
        let bad = DomainPoint {
            x: vec![0.0],
            px: 1.0,
            cm: [0.6, 0.6],
        };
        assert!(FiniteDomain::new(vec![bad]).is_err());
    }

    #[test]
    fn zero_instances_rejected() {
        assert!(verify_bounds(0, 1, VerifyOptions::default()).is_err());
    }
}
