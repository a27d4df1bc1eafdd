// SPDX-License-Identifier: Apache-2.0

//! Confidence-weighted transfer from a complex model to a target family.
//!
//! The complex model's confidences on the training set become per-row
//! weights (and, for `erm_b`, replacement labels); the target family is then
//! retrained on the weighted rows. The target's family never changes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{argmax, ConfidenceMatrix, Dataset};
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::models::hinge::erm_margin_f;
use crate::models::{self, empirical_error, Family, MarginForm, ModelSpec, TrainOptions, TrainedModel};
use crate::rng;
use crate::split::{complement, split_indices, SplitIndices, SplitSpec};

/// One training row: a base sample, the label it is trained towards, and its weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub sample: usize,
    pub label: usize,
    pub weight: f64,
}

/// Weighted rows over a base dataset. A sample may appear in several rows
/// with different labels (the `erm_a` expansion).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTrainingSet {
    base: Dataset,
    rows: Vec<WeightedRow>,
}

impl WeightedTrainingSet {
    pub fn new(base: Dataset, rows: Vec<WeightedRow>, procedure: &'static str) -> Result<Self> {
        let set = Self { base, rows };
        set.check_rows()?;
        if !set.rows.iter().any(|r| r.weight > 0.0) {
            return Err(Error::AllZeroWeights { procedure });
        }
        Ok(set)
    }

    /// One row per sample, labelled with the dataset label and weighted with
    /// the dataset weight (1 when absent).
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let rows = (0..data.len())
            .map(|i| WeightedRow {
                sample: i,
                label: data.labels()[i],
                weight: data.weight(i),
            })
            .collect();
        Self::new(data.clone(), rows, "dataset weights")
    }

    fn check_rows(&self) -> Result<()> {
        let (n, k) = (self.base.len(), self.base.n_labels());
        for (i, r) in self.rows.iter().enumerate() {
            if r.sample >= n || r.label >= k {
                return Err(Error::InvalidArgument(format!("row {i} references sample {} / label {}", r.sample, r.label)));
            }
            if !(r.weight >= 0.0 && r.weight.is_finite()) {
                return Err(Error::InvalidArgument(format!("row {i} has weight {}", r.weight)));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_rows()?;
        if !self.rows.iter().any(|r| r.weight > 0.0) {
            return Err(Error::AllZeroWeights { procedure: "training" });
        }
        Ok(())
    }

    pub fn base(&self) -> &Dataset {
        &self.base
    }

    pub fn rows(&self) -> &[WeightedRow] {
        &self.rows
    }

    pub fn total_weight(&self) -> f64 {
        self.rows.iter().map(|r| r.weight).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.weight).collect()
    }

    /// Multiplies every weight by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.rows.iter_mut().for_each(|r| r.weight *= k);
        out
    }

    /// True when each base sample appears in exactly one row.
    pub fn one_row_per_sample(&self) -> bool {
        let mut seen = vec![false; self.base.len()];
        for r in &self.rows {
            if std::mem::replace(&mut seen[r.sample], true) {
                return false;
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    /// Weight each sample by the complex model's confidence in its training label.
    MleWeighting,
    /// One row per (sample, label) weighted by `c · p(y|x)`.
    ErmA,
    /// Relabel with the complex model's prediction `y'` and weight by `|1/2 - p(y'|x)|`. Binary only.
    ErmB,
}

impl Procedure {
    pub fn name(self) -> &'static str {
        match self {
            Procedure::MleWeighting => "mle_weighting",
            Procedure::ErmA => "erm_a",
            Procedure::ErmB => "erm_b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Margin {
    #[default]
    None,
    /// The margin functions of the generalization bound.
    BoundF,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub grid: Vec<f64>,
    pub folds: usize,
}

pub const DEFAULT_C_GRID: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];

impl Default for Tuning {
    fn default() -> Self {
        Self {
            grid: DEFAULT_C_GRID.to_vec(),
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSpec {
    pub procedure: Procedure,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub margin: Margin,
    #[serde(default)]
    pub tuning: Option<Tuning>,
}

fn one() -> f64 {
    1.0
}

impl TransferSpec {
    pub fn new(procedure: Procedure) -> Self {
        Self {
            procedure,
            c: 1.0,
            margin: Margin::None,
            tuning: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidTransfer(format!("c must be positive, got {}", self.c)));
        }
        if self.procedure == Procedure::ErmB && self.margin == Margin::BoundF {
            return Err(Error::InvalidTransfer("erm_b has no margin term".into()));
        }
        if let Some(t) = &self.tuning {
            if self.procedure != Procedure::ErmA {
                return Err(Error::InvalidTransfer("c tuning only applies to erm_a".into()));
            }
            if t.grid.is_empty() || t.grid.iter().any(|c| !(*c > 0.0)) {
                return Err(Error::InvalidTransfer("tuning grid must be non-empty and positive".into()));
            }
            if t.folds < 2 {
                return Err(Error::InvalidTransfer("tuning needs at least 2 folds".into()));
            }
        }
        Ok(())
    }
}

/// `mle_weighting`: label `y_i`, weight `p_CM(y_i|x_i)`.
pub fn weights_mle(conf: &ConfidenceMatrix, data: &Dataset) -> Result<WeightedTrainingSet> {
    conf.check_aligned(data)?;
    let rows = data
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &y)| WeightedRow {
            sample: i,
            label: y,
            weight: conf.row(i)[y],
        })
        .collect();
    WeightedTrainingSet::new(data.clone(), rows, "mle_weighting")
}

/// `erm_b`: label `y'(x_i) = argmax p_CM(·|x_i)`, weight `|1/2 - p_CM(y'|x_i)|`.
pub fn weights_erm_b(conf: &ConfidenceMatrix, data: &Dataset) -> Result<WeightedTrainingSet> {
    conf.check_aligned(data)?;
    if data.n_labels() != 2 {
        return Err(Error::NotBinary(data.n_labels()));
    }
    let rows = (0..data.len())
        .map(|i| {
            let p = conf.row(i);
            let y = argmax(p);
            WeightedRow {
                sample: i,
                label: y,
                weight: (0.5 - p[y]).abs(),
            }
        })
        .collect();
    WeightedTrainingSet::new(data.clone(), rows, "erm_b")
}

/// `erm_a`: `K` rows per sample, row `y` weighted `c · p_CM(y|x_i)`.
pub fn expand_erm_a(conf: &ConfidenceMatrix, data: &Dataset, c: f64) -> Result<WeightedTrainingSet> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidTransfer(format!("c must be positive, got {c}")));
    }
    conf.check_aligned(data)?;
    let k = data.n_labels();
    let rows = (0..data.len())
        .flat_map(|i| {
            let p = conf.row(i);
            (0..k).map(move |y| WeightedRow {
                sample: i,
                label: y,
                weight: c * p[y],
            })
        })
        .collect();
    WeightedTrainingSet::new(data.clone(), rows, "erm_a")
}

/// `2 e^{-2z}`, the likelihood-family margin function.
pub fn mle_margin_f(z: f64) -> f64 {
    2.0 * (-2.0 * z).exp()
}

/// Margin function evaluated at a margin argument `z >= 0` (already scaled by
/// `c` for the risk form).
pub fn margin_function(form: MarginForm, z: f64) -> f64 {
    match form {
        MarginForm::Erm { .. } => erm_margin_f(z),
        MarginForm::Mle => mle_margin_f(z),
    }
}

/// Margin penalty of a binary `model` at `x`:
/// risk form `f(c |r_1 - r_2|)`, likelihood form `f(|log p(+1|x) - log p(-1|x)|)`.
pub fn margin_penalty(form: MarginForm, model: &TrainedModel, x: &[f64]) -> Result<f64> {
    if model.n_labels != 2 {
        return Err(Error::NotBinary(model.n_labels));
    }
    if x.len() != model.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: model.feature_dim,
            actual: x.len(),
        });
    }
    match form {
        MarginForm::Erm { c } => {
            let r = model
                .risks_row(x)
                .ok_or_else(|| Error::FamilyMismatch(format!("{} exposes no risks", model.family())))?;
            Ok(erm_margin_f(c * (r[0] - r[1]).abs()))
        }
        MarginForm::Mle => {
            let lp = model
                .log_probs_row(x)
                .ok_or_else(|| Error::FamilyMismatch(format!("{} exposes no likelihood", model.family())))?;
            Ok(mle_margin_f((lp[0] - lp[1]).abs()))
        }
    }
}

/// Training objective of `model` on `set`, evaluated from the model's outputs.
///
/// With a margin: `(1/m) [Σ_rows w·loss + Σ_samples f]`; without:
/// `Σ_rows w·loss / Σ w`. The per-row loss is the risk for the hinge family
/// and `-log p(y|x)` for likelihood families.
pub fn realized_objective(model: &TrainedModel, set: &WeightedTrainingSet, margin: Option<MarginForm>) -> Result<f64> {
    let base = set.base();
    let mut total = 0.0;
    for r in set.rows() {
        let x = base.x(r.sample);
        let loss = if let Some(risk) = model.risks_row(x) {
            risk[r.label]
        } else if let Some(lp) = model.log_probs_row(x) {
            -lp[r.label]
        } else {
            return Err(Error::FamilyMismatch(format!("{} has no differentiable objective", model.family())));
        };
        total += r.weight * loss;
    }
    match margin {
        None => Ok(total / set.total_weight()),
        Some(form) => {
            for i in 0..base.len() {
                total += margin_penalty(form, model, base.x(i))?;
            }
            Ok(total / base.len() as f64)
        }
    }
}

/// Weighted rows and training options for `spec`, given the complex model's
/// confidences on `data`. `c` overrides `spec.c` (used after tuning).
pub fn build_training_set(
    spec: &TransferSpec,
    conf: &ConfidenceMatrix,
    data: &Dataset,
    c: f64,
) -> Result<(WeightedTrainingSet, TrainOptions)> {
    let bound_f = spec.margin == Margin::BoundF;
    Ok(match spec.procedure {
        Procedure::MleWeighting if bound_f => (
            // bound-faithful form: every label weighted by p_CM(y|x)
            expand_erm_a(conf, data, 1.0)?,
            TrainOptions {
                margin: Some(MarginForm::Mle),
            },
        ),
        Procedure::MleWeighting => (weights_mle(conf, data)?, TrainOptions::default()),
        Procedure::ErmA => (
            expand_erm_a(conf, data, c)?,
            TrainOptions {
                margin: bound_f.then_some(MarginForm::Erm { c }),
            },
        ),
        Procedure::ErmB => (weights_erm_b(conf, data)?, TrainOptions::default()),
    })
}

/// Result of [`tune_c`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub chosen: f64,
    /// `(c, mean cross-validated 0-1 error)` in grid order.
    pub errors: Vec<(f64, f64)>,
}

/// Picks the `c` from `grid` with the lowest cross-validated 0-1 error of the
/// `erm_a`-retrained target; ties go to the smallest `c`.
pub fn tune_c(
    tm_spec: &ModelSpec,
    margin: Margin,
    grid: &[f64],
    data: &Dataset,
    conf: &ConfidenceMatrix,
    folds: usize,
    seed: u64,
) -> Result<TuningResult> {
    if grid.is_empty() {
        return Err(Error::InvalidTransfer("empty c grid".into()));
    }
    conf.check_aligned(data)?;
    let idx = match split_indices(data.len(), &SplitSpec::kfold(folds, seed))? {
        SplitIndices::Folds(f) => f,
        SplitIndices::TrainTest { .. } => unreachable!(),
    };
    let spec = TransferSpec {
        procedure: Procedure::ErmA,
        c: 1.0,
        margin,
        tuning: None,
    };
    let errors: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&c| -> Result<(f64, f64)> {
            let mut total = 0.0;
            for (f, test) in idx.iter().enumerate() {
                let train_idx = complement(&idx, f);
                let train = data.subset(&train_idx);
                let (set, opts) = build_training_set(&spec, &conf.subset(&train_idx), &train, c)?;
                let model = models::train_weighted(tm_spec, &set, opts, rng::child_seed(seed, f as u64))
                    .map_err(|e| Error::Fold {
                        fold: f,
                        source: Box::new(e),
                    })?;
                total += empirical_error(&model, &data.subset(test), LossKind::ZeroOne)?;
            }
            Ok((c, total / idx.len() as f64))
        })
        .collect::<Result<_>>()?;
    let mut best = errors[0];
    for &(c, e) in &errors[1..] {
        if e < best.1 || (e == best.1 && c < best.0) {
            best = (c, e);
        }
    }
    Ok(TuningResult { chosen: best.0, errors })
}

/// Trained target plus what went into it.
#[derive(Debug, Clone)]
pub struct TransferOutcome {
    pub model: TrainedModel,
    pub set: WeightedTrainingSet,
    pub c: f64,
    pub tuning: Option<TuningResult>,
}

/// Computes `cm`'s confidences on `train`, builds the weighted set for `spec`
/// and retrains `tm_spec`. The returned model always has `tm_spec.family`.
pub fn transfer(
    tm_spec: &ModelSpec,
    cm: &TrainedModel,
    train: &Dataset,
    spec: &TransferSpec,
    seed: u64,
) -> Result<TrainedModel> {
    transfer_detailed(tm_spec, cm, train, spec, seed).map(|o| o.model)
}

pub fn transfer_detailed(
    tm_spec: &ModelSpec,
    cm: &TrainedModel,
    train: &Dataset,
    spec: &TransferSpec,
    seed: u64,
) -> Result<TransferOutcome> {
    spec.validate()?;
    if spec.margin == Margin::BoundF {
        let want = match spec.procedure {
            Procedure::MleWeighting => Family::LinearMle,
            _ => Family::LinearErmHinge,
        };
        if tm_spec.family != want {
            return Err(Error::InvalidTransfer(format!(
                "{} with the margin term needs a {want} target, got {}",
                spec.procedure.name(),
                tm_spec.family
            )));
        }
    }
    let conf = cm.confidence(train.features())?;
    let tuning = match &spec.tuning {
        Some(t) => Some(tune_c(
            tm_spec,
            spec.margin,
            &t.grid,
            train,
            &conf,
            t.folds,
            rng::child_seed(seed, rng::streams::TUNING),
        )?),
        None => None,
    };
    let c = tuning.as_ref().map_or(spec.c, |t| t.chosen);
    let (set, opts) = build_training_set(spec, &conf, train, c)?;
    let model = models::train_weighted(tm_spec, &set, opts, seed)?;
    if model.family() != tm_spec.family {
        return Err(Error::FamilyMismatch(format!(
            "transfer produced {} from a {} target",
            model.family(),
            tm_spec.family
        )));
    }
    Ok(TransferOutcome { model, set, c, tuning })
}
