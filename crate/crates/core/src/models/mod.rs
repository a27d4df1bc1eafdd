// SPDX-License-Identifier: Apache-2.0

//! Model zoo: complex models that emit confidences and simple target families
//! that train under per-sample weights.
//!
//! Every family trains from a [`WeightedTrainingSet`], i.e. a list of
//! `(sample, label, weight)` rows over a base feature matrix. A plain
//! [`Dataset`] is the special case of one row per sample with the dataset's
//! weights (all ones when absent).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{argmax, ConfidenceMatrix, Dataset, Matrix};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::rng;
use crate::split::{complement, split_indices, SplitIndices, SplitSpec};
use crate::transfer::WeightedTrainingSet;

pub mod forest;
pub mod hinge;
pub mod knn;
pub mod linear;
pub mod mlp;
pub mod optim;
pub mod tree;

pub use optim::FitInfo;

/// Model family. Fixed for a model's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LinearMle,
    LinearErmHinge,
    DecisionTree,
    Knn,
    RandomForest,
    Mlp1,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::LinearMle,
        Family::LinearErmHinge,
        Family::DecisionTree,
        Family::Knn,
        Family::RandomForest,
        Family::Mlp1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::LinearMle => "linear_mle",
            Family::LinearErmHinge => "linear_erm_hinge",
            Family::DecisionTree => "decision_tree",
            Family::Knn => "knn",
            Family::RandomForest => "random_forest",
            Family::Mlp1 => "mlp1",
        }
    }

    /// Known hyperparameters and their defaults.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Family::LinearMle => &[("learning_rate", 1.0), ("max_iter", 5000.0), ("tol", 1e-7)],
            Family::LinearErmHinge => &[
                ("learning_rate", 0.5),
                ("max_iter", 5000.0),
                ("tol", 1e-7),
                ("pseudo_c", 1.0),
            ],
            Family::DecisionTree => &[("max_depth", 6.0), ("min_samples_leaf", 1.0)],
            Family::Knn => &[("k", 5.0)],
            Family::RandomForest => &[
                ("n_trees", 50.0),
                ("max_depth", 10.0),
                ("min_samples_leaf", 1.0),
                ("max_features", 0.0),
            ],
            Family::Mlp1 => &[
                ("hidden_units", 32.0),
                ("learning_rate", 0.5),
                ("max_iter", 3000.0),
                ("tol", 1e-7),
            ],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model family `{s}`")))
    }
}

/// Family-specific numeric hyperparameters. Missing keys take the family default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hyperparams(pub BTreeMap<String, f64>);

impl Hyperparams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.0.insert(key.to_string(), value);
    }
}

/// A model family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub hyperparams: Hyperparams,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            hyperparams: Hyperparams::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.hyperparams.set(key, value);
        self
    }

    /// Rejects unknown keys and out-of-range values.
    pub fn validate(&self) -> Result<()> {
        let defaults = self.family.defaults();
        for (k, v) in &self.hyperparams.0 {
            if !defaults.iter().any(|(d, _)| d == k) {
                return Err(self.bad(k, "unknown key"));
            }
            if !v.is_finite() {
                return Err(self.bad(k, "must be finite"));
            }
        }
        for (k, _) in defaults {
            let v = self.get(k);
            let ok = match *k {
                "learning_rate" | "tol" | "pseudo_c" => v > 0.0,
                "max_iter" | "max_depth" | "min_samples_leaf" | "k" | "n_trees" | "hidden_units" => {
                    v >= 1.0 && v.fract() == 0.0
                }
                "max_features" => v >= 0.0 && v.fract() == 0.0,
                _ => true,
            };
            if !ok {
                return Err(self.bad(k, &format!("invalid value {v}")));
            }
        }
        Ok(())
    }

    fn bad(&self, key: &str, reason: &str) -> Error {
        Error::InvalidHyperparam {
            family: self.family.name(),
            key: key.to_string(),
            reason: reason.to_string(),
        }
    }

    /// Value of `key`, falling back to the family default. Panics on keys the
    /// family does not define; callers only ask for their own keys.
    pub fn get(&self, key: &str) -> f64 {
        self.hyperparams.0.get(key).copied().unwrap_or_else(|| {
            self.family
                .defaults()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap_or_else(|| panic!("{} has no hyperparameter `{key}`", self.family))
        })
    }

    pub fn get_usize(&self, key: &str) -> usize {
        self.get(key) as usize
    }

    pub(crate) fn gd_config(&self) -> optim::GdConfig {
        optim::GdConfig {
            learning_rate: self.get("learning_rate"),
            max_iter: self.get_usize("max_iter"),
            tol: self.get("tol"),
        }
    }
}

/// Margin term added to the training objective of the binary linear families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum MarginForm {
    /// `log(1 + e^{-z}) + 2 e^{-2z}` at `z = c |r_1(x) - r_2(x)|` (risk families).
    Erm { c: f64 },
    /// `2 e^{-2z}` at `z = |log p(+1|x) - log p(-1|x)|` (likelihood families).
    Mle,
}

/// Extra training options beyond the weighted rows.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrainOptions {
    /// When set, the objective becomes `(1/m) [Σ_rows w·loss + Σ_samples f(margin)]`
    /// with `m` the number of base samples. Otherwise it is `Σ_rows w·loss / Σ w`.
    pub margin: Option<MarginForm>,
}

/// Fitted parameters, one variant per family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Params {
    /// Row-major `K x (d + 1)`: per label, `d` weights then the bias.
    Linear { theta: Vec<f64> },
    Tree(tree::Tree),
    Forest { trees: Vec<tree::Tree> },
    Knn(knn::KnnIndex),
    Mlp(mlp::MlpParams),
}

/// A fitted model. Immutable; `predict` and `confidence` are pure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub n_labels: usize,
    pub feature_dim: usize,
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitInfo>,
}

/// Trains `spec` on `data`, honoring `data`'s weights.
pub fn train(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<TrainedModel> {
    let set = WeightedTrainingSet::from_dataset(data)?;
    train_weighted(spec, &set, TrainOptions::default(), seed)
}

/// Trains `spec` on an explicit set of weighted rows.
pub fn train_weighted(
    spec: &ModelSpec,
    set: &WeightedTrainingSet,
    opts: TrainOptions,
    seed: u64,
) -> Result<TrainedModel> {
    spec.validate()?;
    set.validate()?;
    let base = set.base();
    let k = base.n_labels();
    if base.len() < k {
        return Err(Error::Training(format!(
            "{} samples is fewer than the {k} labels",
            base.len()
        )));
    }
    if opts.margin.is_some() {
        match (spec.family, opts.margin) {
            (Family::LinearMle, Some(MarginForm::Mle)) | (Family::LinearErmHinge, Some(MarginForm::Erm { .. })) => {}
            (f, Some(m)) => {
                return Err(Error::InvalidTransfer(format!("margin form {m:?} is not defined for {f}")));
            }
            _ => unreachable!(),
        }
        if k != 2 {
            return Err(Error::NotBinary(k));
        }
    }
    let (params, fit) = match spec.family {
        Family::LinearMle => {
            let (theta, fit) = linear::fit(spec, set, opts.margin)?;
            (Params::Linear { theta }, Some(fit))
        }
        Family::LinearErmHinge => {
            let (theta, fit) = hinge::fit(spec, set, opts.margin)?;
            (Params::Linear { theta }, Some(fit))
        }
        Family::DecisionTree => {
            let cfg = tree::TreeConfig::from_spec(spec, base.dim());
            (Params::Tree(tree::fit(set, &cfg, &mut rng::substream(seed, 0))?), None)
        }
        Family::RandomForest => (
            Params::Forest {
                trees: forest::fit(spec, set, seed)?,
            },
            None,
        ),
        Family::Knn => (Params::Knn(knn::KnnIndex::fit(set)?), None),
        Family::Mlp1 => {
            let (p, fit) = mlp::fit(spec, set, seed)?;
            (Params::Mlp(p), Some(fit))
        }
    };
    if let Some(f) = &fit {
        if !f.converged {
            log::warn!(
                "{}: optimizer stopped after {} iterations with gradient norm {:.3e}",
                spec.family,
                f.iterations,
                f.grad_norm
            );
        }
    }
    Ok(TrainedModel {
        spec: spec.clone(),
        n_labels: k,
        feature_dim: base.dim(),
        params,
        fit,
    })
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.spec.family
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: d,
            });
        }
        Ok(())
    }

    /// Raw per-label linear scores `w_k · x + b_k`.
    fn linear_scores(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        linear::scores(theta, self.n_labels, x)
    }

    /// Per-label risks `r(y, x, θ)` of the hinge family, `None` otherwise.
    pub fn risks_row(&self, x: &[f64]) -> Option<Vec<f64>> {
        match (&self.params, self.spec.family) {
            (Params::Linear { theta }, Family::LinearErmHinge) => {
                Some(hinge::risks(&self.linear_scores(theta, x)))
            }
            _ => None,
        }
    }

    /// Log-probabilities of the likelihood families (linear_mle, mlp1).
    pub fn log_probs_row(&self, x: &[f64]) -> Option<Vec<f64>> {
        match (&self.params, self.spec.family) {
            (Params::Linear { theta }, Family::LinearMle) => {
                Some(linear::log_softmax(&self.linear_scores(theta, x)))
            }
            (Params::Mlp(p), _) => Some(linear::log_softmax(&p.logits(x))),
            _ => None,
        }
    }

    /// Confidence row for a single feature vector. Assumes a matching dimension.
    pub fn confidence_row(&self, x: &[f64]) -> Vec<f64> {
        match &self.params {
            Params::Linear { theta } => match self.spec.family {
                Family::LinearErmHinge => {
                    hinge::pseudo_confidence(&self.risks_row(x).expect("hinge"), self.spec.get("pseudo_c"))
                }
                _ => linear::softmax(&self.linear_scores(theta, x)),
            },
            Params::Tree(t) => t.leaf(x).to_vec(),
            Params::Forest { trees } => forest::confidence(trees, self.n_labels, x),
            Params::Knn(idx) => idx.confidence(x, self.spec.get_usize("k"), self.n_labels),
            Params::Mlp(p) => linear::softmax(&p.logits(x)),
        }
    }

    /// Predicted label for a single feature vector: argmin of risk for the
    /// hinge family, argmax of confidence otherwise; ties to the lowest label.
    pub fn predict_row(&self, x: &[f64]) -> usize {
        match self.risks_row(x) {
            Some(r) => crate::dataset::argmin(&r),
            None => argmax(&self.confidence_row(x)),
        }
    }

    pub fn predict(&self, features: &Matrix) -> Result<Vec<usize>> {
        self.check_dim(features.cols())?;
        Ok(features.iter_rows().map(|x| self.predict_row(x)).collect())
    }

    pub fn confidence(&self, features: &Matrix) -> Result<ConfidenceMatrix> {
        self.check_dim(features.cols())?;
        let mut out = Matrix::zeros(features.rows(), self.n_labels);
        for (i, x) in features.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.confidence_row(x));
        }
        ConfidenceMatrix::new(out, self.spec.family.name())
    }

    pub fn to_json(&self) -> Result<String> {
        crate::serial::to_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        crate::serial::from_json(s)
    }
}

/// Mean loss of `model` on `data`. Dataset weights are ignored.
pub fn empirical_error(model: &TrainedModel, data: &Dataset, loss: LossKind) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let pred = model.predict(data.features())?;
    let total: f64 = pred
        .iter()
        .zip(data.labels())
        .map(|(&p, &y)| loss.eval(p, y))
        .sum();
    Ok(total / data.len() as f64)
}

/// Mean held-out error over `folds` folds, each fold's model trained on the rest.
pub fn cross_validated_error(
    spec: &ModelSpec,
    data: &Dataset,
    folds: usize,
    loss: LossKind,
    seed: u64,
) -> Result<f64> {
    let idx = match split_indices(data.len(), &SplitSpec::kfold(folds, seed))? {
        SplitIndices::Folds(f) => f,
        SplitIndices::TrainTest { .. } => unreachable!(),
    };
    let mut total = 0.0;
    for (i, test_idx) in idx.iter().enumerate() {
        let train_idx = complement(&idx, i);
        let fold_seed = rng::child_seed(seed, i as u64);
        let model = train(spec, &data.subset(&train_idx), fold_seed).map_err(|e| Error::Fold {
            fold: i,
            source: Box::new(e),
        })?;
        total += empirical_error(&model, &data.subset(test_idx), loss)?;
    }
    Ok(total / idx.len() as f64)
}
