// SPDX-License-Identifier: Apache-2.0

//! The δ ratio, the (δ, γ) pair, interpretability reports, multi-seed
//! aggregation, and the same-distribution reduction check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::models::{self, empirical_error, ModelSpec, TrainedModel};
use crate::rng;
use crate::robustness::{make_robust_set, RobustnessSpec};
use crate::transfer::{self, TransferSpec};

pub const FLAG_IDENTITY_SET: &str = "identity robustness set";
pub const FLAG_IDENTITY_CONVENTION: &str = "identity convention";

/// `e_after / e_before`; `None` when `e_before == 0`.
pub fn delta(e_before: f64, e_after: f64) -> Result<Option<f64>> {
    if !(e_before >= 0.0 && e_after >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "errors must be non-negative, got {e_before} and {e_after}"
        )));
    }
    Ok((e_before > 0.0).then(|| e_after / e_before))
}

/// `(e_tmI_robust - e_tmI_test) / (e_tm_robust - e_tm_test)`; `None` when
/// the baseline gap is zero.
pub fn gamma(e_tm_test: f64, e_tm_robust: f64, e_tmi_test: f64, e_tmi_robust: f64) -> Option<f64> {
    let den = e_tm_robust - e_tm_test;
    (den != 0.0).then(|| (e_tmi_robust - e_tmi_test) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Errors {
    pub tm_test: f64,
    #[serde(rename = "tmI_test")]
    pub tmi_test: f64,
    pub tm_robust: f64,
    #[serde(rename = "tmI_robust")]
    pub tmi_robust: f64,
}

/// Results for one robustness set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustResult {
    pub name: String,
    pub tm_robust: f64,
    #[serde(rename = "tmI_robust")]
    pub tmi_robust: f64,
    /// δ measured on this robustness set.
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_reason: Option<String>,
    pub hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seeds: Vec<u64>,
    /// Content hashes keyed by role (`test`, `robust:<name>`, ...).
    pub hashes: BTreeMap<String, String>,
    pub procedure: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tm_family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cm_family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_mapping: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilityReport {
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_reason: Option<String>,
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_reason: Option<String>,
    /// Errors against the first robustness set.
    pub errors: Errors,
    pub loss: LossKind,
    pub flags: Vec<String>,
    pub robust_sets: Vec<RobustResult>,
    /// Worst case over the test set and every robustness set.
    pub delta_max: Option<f64>,
    pub gamma_max: Option<f64>,
    pub provenance: Provenance,
}

impl InterpretabilityReport {
    pub fn to_json(&self) -> Result<String> {
        crate::serial::to_json(self)
    }
}

fn max_defined(vals: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    vals.into_iter().flatten().reduce(f64::max)
}

fn check_pair(tm: &TrainedModel, tmi: &TrainedModel) -> Result<()> {
    if tm.family() != tmi.family() {
        return Err(Error::FamilyMismatch(format!(
            "baseline is {} but the improved model is {}",
            tm.family(),
            tmi.family()
        )));
    }
    Ok(())
}

/// Evaluates both models on the test set and one robustness set.
pub fn evaluate(
    tm: &TrainedModel,
    tmi: &TrainedModel,
    s_test: &Dataset,
    s_robust: &Dataset,
    loss: LossKind,
) -> Result<InterpretabilityReport> {
    evaluate_multi(tm, tmi, s_test, &[("robust".to_string(), s_robust.clone())], loss)
}

/// Evaluates both models on the test set and every named robustness set.
/// The headline `gamma` and `errors` refer to the first set.
pub fn evaluate_multi(
    tm: &TrainedModel,
    tmi: &TrainedModel,
    s_test: &Dataset,
    robust: &[(String, Dataset)],
    loss: LossKind,
) -> Result<InterpretabilityReport> {
    check_pair(tm, tmi)?;
    if robust.is_empty() {
        return Err(Error::InvalidArgument("at least one robustness set is required".into()));
    }
    let tm_test = empirical_error(tm, s_test, loss)?;
    let tmi_test = empirical_error(tmi, s_test, loss)?;
    let test_hash = s_test.content_hash();
    let mut hashes = BTreeMap::new();
    hashes.insert("test".to_string(), test_hash.clone());

    let mut flags = Vec::new();
    let mut results = Vec::with_capacity(robust.len());
    for (name, s_r) in robust {
        let tm_r = empirical_error(tm, s_r, loss)?;
        let tmi_r = empirical_error(tmi, s_r, loss)?;
        let hash = s_r.content_hash();
        let (mut g, mut reason) = match gamma(tm_test, tm_r, tmi_test, tmi_r) {
            Some(g) => (Some(g), None),
            None => (None, Some("baseline robustness gap is zero".to_string())),
        };
        if hash == test_hash {
            // both gaps are exactly zero; report the tabulated convention value
            g = Some(0.0);
            reason = Some(format!("{FLAG_IDENTITY_SET}: 0 <= 0; gamma set to 0 by convention"));
            for f in [FLAG_IDENTITY_SET, FLAG_IDENTITY_CONVENTION] {
                if !flags.iter().any(|x| x == f) {
                    flags.push(f.to_string());
                }
            }
        }
        hashes.insert(format!("robust:{name}"), hash.clone());
        results.push(RobustResult {
            name: name.clone(),
            tm_robust: tm_r,
            tmi_robust: tmi_r,
            delta: delta(tm_r, tmi_r)?,
            gamma: g,
            gamma_reason: reason,
            hash,
        });
    }
    let d = delta(tm_test, tmi_test)?;
    let first = &results[0];
    Ok(InterpretabilityReport {
        delta: d,
        delta_reason: d.is_none().then(|| "baseline test error is zero".to_string()),
        gamma: first.gamma,
        gamma_reason: first.gamma_reason.clone(),
        errors: Errors {
            tm_test,
            tmi_test,
            tm_robust: first.tm_robust,
            tmi_robust: first.tmi_robust,
        },
        loss,
        flags,
        delta_max: max_defined(std::iter::once(d).chain(results.iter().map(|r| r.delta))),
        gamma_max: max_defined(results.iter().map(|r| r.gamma)),
        robust_sets: results,
        provenance: Provenance {
            hashes,
            tm_family: Some(tm.family().to_string()),
            ..Provenance::default()
        },
    })
}

/// Median, mean and a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub std: f64,
    pub ci95: [f64; 2],
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let half = 1.96 * std / (n as f64).sqrt();
    Some(Summary {
        n,
        median,
        mean,
        std,
        ci95: [mean - half, mean + half],
    })
}

/// How the robustness sample relates to the test sample in [`reduction_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RobustDraw {
    /// The robustness sample is the test sample.
    SameDraw,
    /// An independent draw from the same generator.
    Independent,
    /// An independent draw passed through a robustness generator.
    Perturbed { spec: RobustnessSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub tm: ModelSpec,
    pub cm: ModelSpec,
    pub transfer: TransferSpec,
    /// Size of each test and robustness draw.
    pub n: usize,
    /// Size of the training draw the models are fitted on once.
    pub n_train: usize,
    pub trials: usize,
    pub draw: RobustDraw,
    pub loss: LossKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    /// `e_robust - e_test` per trial.
    pub gaps: Vec<f64>,
    pub mean: f64,
    pub std_err: f64,
    /// `|mean| <= 3 std_err` (exact zero required when `std_err == 0`).
    pub within_3se: bool,
}

impl GapStats {
    fn new(gaps: Vec<f64>) -> Self {
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let var = if gaps.len() > 1 {
            gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_err = (var / n).sqrt();
        Self {
            within_3se: mean.abs() <= 3.0 * std_err,
            gaps,
            mean,
            std_err,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub tm: GapStats,
    #[serde(rename = "tmI")]
    pub tmi: GapStats,
    /// Both models' gaps are consistent with zero.
    pub reduces: bool,
    pub flags: Vec<String>,
}

/// Fits the baseline and transferred targets once, then draws `trials` pairs
/// of test/robustness samples of size `n` and records the robustness gap of
/// each model. Under a shared distribution the gaps should average to zero.
///
/// `generator(n, seed)` must return i.i.d. draws.
pub fn reduction_check<G>(cfg: &ReductionConfig, generator: G) -> Result<ReductionReport>
where
    G: Fn(usize, u64) -> Result<Dataset> + Sync,
{
    if cfg.n < 100 {
        return Err(Error::InvalidArgument(format!(
            "n = {} is too small for the standard-error test (need >= 100)",
            cfg.n
        )));
    }
    if cfg.trials < 2 {
        return Err(Error::InvalidArgument("at least 2 trials are needed".into()));
    }
    let train = generator(cfg.n_train, rng::child_seed(cfg.seed, rng::streams::TRAIN_DRAW))?;
    let cm = models::train(&cfg.cm, &train, rng::child_seed(cfg.seed, rng::streams::CM_TRAIN))?;
    let tm_seed = rng::child_seed(cfg.seed, rng::streams::TM_TRAIN);
    let tm = models::train(&cfg.tm, &train, tm_seed)?;
    let tmi = transfer::transfer(&cfg.tm, &cm, &train, &cfg.transfer, tm_seed)?;

    use rayon::prelude::*;
    let gaps = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<[f64; 2]> {
            let base = rng::child_seed(cfg.seed, 1000 + t as u64);
            let s_t = generator(cfg.n, rng::child_seed(base, rng::streams::TEST_DRAW))?;
            let s_r = match &cfg.draw {
                RobustDraw::SameDraw => s_t.clone(),
                RobustDraw::Independent => generator(cfg.n, rng::child_seed(base, rng::streams::ROBUST))?,
                RobustDraw::Perturbed { spec } => {
                    let fresh = generator(cfg.n, rng::child_seed(base, rng::streams::ROBUST))?;
                    let mut s = spec.clone();
                    s.seed = rng::child_seed(spec.seed, t as u64);
                    make_robust_set(&fresh, &s)?
                }
            };
            let mut out = [0.0; 2];
            for (o, m) in out.iter_mut().zip([&tm, &tmi]) {
                *o = empirical_error(m, &s_r, cfg.loss)? - empirical_error(m, &s_t, cfg.loss)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let tm_stats = GapStats::new(gaps.iter().map(|g| g[0]).collect());
    let tmi_stats = GapStats::new(gaps.iter().map(|g| g[1]).collect());
    let mut flags = Vec::new();
    if cfg.draw == RobustDraw::SameDraw {
        flags.push(FLAG_IDENTITY_SET.to_string());
    }
    let reduces = tm_stats.within_3se && tmi_stats.within_3se;
    if !reduces {
        flags.push("robustness gap differs from zero: no reduction".to_string());
    }
    Ok(ReductionReport {
        tm: tm_stats,
        tmi: tmi_stats,
        reduces,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_examples() {
        assert!((delta(103.64, 95.83).unwrap().unwrap() - 0.9246).abs() < 5e-4);
        assert!((delta(0.5, 0.03).unwrap().unwrap() - 0.06).abs() < 1e-12);
        assert!((delta(0.259, 0.148).unwrap().unwrap() - 0.571).abs() < 1e-3);
        assert_eq!(delta(0.0, 0.1).unwrap(), None);
        assert!(delta(-0.1, 0.1).is_err());
    }

    #[test]
    fn gamma_examples() {
        let g = gamma(0.234, 0.290, 0.218, 0.278).unwrap();
        assert!((g - 1.0714).abs() < 1e-3);
        assert_eq!(gamma(0.2, 0.3, 0.25, 0.25), Some(0.0));
        assert_eq!(gamma(0.2, 0.2, 0.1, 0.1), None);
    }

    #[test]
    fn summary_stats() {
        let s = summarize(&[3.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.mean, 2.5);
        assert!(s.ci95[0] < 2.5 && s.ci95[1] > 2.5);
        assert!(summarize(&[]).is_none());
        assert_eq!(summarize(&[7.0]).unwrap().ci95, [7.0, 7.0]);
    }
}
