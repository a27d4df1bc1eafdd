// SPDX-License-Identifier: Apache-2.0

//! Config-driven pipelines: the multi-seed transfer run and the CM capacity
//! sweep.
//!
//! Configs are TOML. See the README for the full grammar; a minimal run:
//!
//! ```toml
//! seeds = [0, 1, 2]
//!
//! [data]
//! source = "synthetic_curve"
//! n = 1000
//! noise_fraction = 0.05
//!
//! [cm]
//! family = "knn"
//!
//! [tm]
//! family = "linear_mle"
//!
//! [transfer]
//! procedure = "mle_weighting"
//!
//! [[robustness]]
//! kind = "label_flip"
//! fraction = 0.1
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::io::{self, BlobParams, CsvSchema, CurveParams, LabelMapping};
use crate::loss::LossKind;
use crate::metrics::{self, InterpretabilityReport, Summary};
use crate::models::{self, empirical_error, Family, ModelSpec};
use crate::rng::{self, streams};
use crate::robustness::{make_robust_set, RobustnessKind, RobustnessSpec};
use crate::serial::fmt_f64;
use crate::split::{split, Partition, SplitSpec};
use crate::transfer::{self, Procedure, TransferSpec};

pub const TM_FAMILIES: [Family; 3] = [Family::LinearMle, Family::LinearErmHinge, Family::DecisionTree];
pub const CM_FAMILIES: [Family; 3] = [Family::Knn, Family::RandomForest, Family::Mlp1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataConfig {
    SyntheticCurve {
        n: usize,
        #[serde(default)]
        noise_fraction: f64,
        /// Size of an independent test draw; the split is used when absent.
        #[serde(default)]
        test_n: Option<usize>,
        #[serde(default = "default_frequency")]
        curve_frequency: f64,
    },
    SyntheticBlobs {
        n: usize,
        k: usize,
        dim: usize,
        separation: f64,
        #[serde(default)]
        test_n: Option<usize>,
    },
    Csv {
        path: PathBuf,
        label_column: String,
        #[serde(default)]
        weight_column: Option<String>,
        #[serde(default = "comma")]
        delimiter: char,
        #[serde(default = "yes")]
        has_header: bool,
        #[serde(default)]
        label_mapping: LabelMapping,
    },
}

fn default_frequency() -> f64 {
    io::synth::DEFAULT_CURVE_FREQUENCY
}

fn comma() -> char {
    ','
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Random; `fraction` is the test share.
    #[default]
    Holdout,
    /// Order-preserving; `fraction` is the training share.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmPartition {
    /// CM and TM train on the same rows.
    #[default]
    Shared,
    /// The training rows are halved: CM on one half, TM on the other.
    Disjoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default)]
    pub kind: SplitMode,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default)]
    pub cm_partition: CmPartition,
}

fn default_fraction() -> f64 {
    0.3
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            kind: SplitMode::Holdout,
            fraction: default_fraction(),
            cm_partition: CmPartition::Shared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustKindName {
    Identity,
    LabelFlip,
    FeatureNoise,
    ClassSkew,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessConfig {
    pub kind: RobustKindName,
    #[serde(default)]
    pub fraction: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub label: Option<usize>,
    #[serde(default)]
    pub name: Option<String>,
    /// Fixed generator seed; derived from the run seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RobustnessConfig {
    pub fn kind(&self) -> Result<RobustnessKind> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| Error::Config(format!("robustness kind {:?} needs `{key}`", self.kind)))
        };
        Ok(match self.kind {
            RobustKindName::Identity => RobustnessKind::Identity,
            RobustKindName::LabelFlip => RobustnessKind::LabelFlip {
                fraction: need(self.fraction, "fraction")?,
            },
            RobustKindName::FeatureNoise => RobustnessKind::FeatureNoise {
                sigma: need(self.sigma, "sigma")?,
            },
            RobustKindName::ClassSkew => RobustnessKind::ClassSkew {
                label: self
                    .label
                    .ok_or_else(|| Error::Config("robustness kind class_skew needs `label`".into()))?,
            },
        })
    }

    fn spec(&self, run_seed: u64, index: usize) -> Result<RobustnessSpec> {
        let seed = self
            .seed
            .unwrap_or_else(|| rng::child_seed(run_seed, streams::ROBUST * 1000 + index as u64));
        Ok(RobustnessSpec::new(self.kind()?, seed))
    }

    pub fn display_name(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| match self.kind() {
            Ok(k) => RobustnessSpec::new(k, 0).label(),
            Err(_) => format!("robust{index}"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// CM hyperparameter varied across the grid, e.g. `hidden_units`.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub loss: LossKind,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    pub cm: ModelSpec,
    pub tm: ModelSpec,
    pub transfer: TransferSpec,
    #[serde(default)]
    pub robustness: Vec<RobustnessConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// 1-based `(line, column)` of a byte offset.
fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

impl ExperimentConfig {
    /// Parses and validates; syntax and schema errors carry line and column.
    pub fn from_toml_str(src: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(src).map_err(|e| {
            let (line, col) = e.span().map_or((0, 0), |s| line_col(src, s.start));
            Error::Parse {
                path: origin.to_string(),
                line,
                column: col.to_string(),
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let src = fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&src, &path.display().to_string())?;
        // relative CSV paths are resolved against the config's directory
        if let DataConfig::Csv { path: p, .. } = &mut cfg.data {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` is empty".into()));
        }
        if !TM_FAMILIES.contains(&self.tm.family) {
            return Err(Error::Config(format!(
                "target family {} is not allowed; use one of linear_mle, linear_erm_hinge, decision_tree",
                self.tm.family
            )));
        }
        if !CM_FAMILIES.contains(&self.cm.family) {
            return Err(Error::Config(format!(
                "complex family {} is not allowed; use one of knn, random_forest, mlp1",
                self.cm.family
            )));
        }
        let cfg_err = |e: Error| Error::Config(e.to_string());
        self.tm.validate().map_err(cfg_err)?;
        self.cm.validate().map_err(cfg_err)?;
        self.transfer.validate().map_err(cfg_err)?;
        if self.jobs == Some(0) {
            return Err(Error::Config("`jobs` must be at least 1".into()));
        }
        self.split_spec(0).validate().map_err(cfg_err)?;
        for (i, r) in self.robustness.iter().enumerate() {
            r.spec(0, i)?.validate().map_err(cfg_err)?;
        }
        match &self.data {
            DataConfig::SyntheticCurve {
                noise_fraction,
                curve_frequency,
                ..
            } => {
                if !(0.0..=1.0).contains(noise_fraction) {
                    return Err(Error::Config(format!("noise_fraction {noise_fraction} outside [0, 1]")));
                }
                if !curve_frequency.is_finite() {
                    return Err(Error::Config("curve_frequency must be finite".into()));
                }
            }
            DataConfig::SyntheticBlobs { separation, k, .. } => {
                if !(*separation > 0.0) || *k < 2 {
                    return Err(Error::Config("blobs need separation > 0 and k >= 2".into()));
                }
            }
            DataConfig::Csv { .. } => {}
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::Config("sweep.values is empty".into()));
            }
            if !self.cm.family.defaults().iter().any(|(k, _)| *k == s.param) {
                return Err(Error::Config(format!("{} has no hyperparameter `{}`", self.cm.family, s.param)));
            }
            for v in &s.values {
                self.cm.clone().with(&s.param, *v).validate().map_err(cfg_err)?;
            }
        }
        Ok(())
    }

    fn split_spec(&self, seed: u64) -> SplitSpec {
        match self.split.kind {
            SplitMode::Holdout => SplitSpec::holdout(self.split.fraction, rng::child_seed(seed, streams::SPLIT)),
            SplitMode::Sequential => SplitSpec::sequential(self.split.fraction),
        }
    }

    fn robust_specs(&self, seed: u64) -> Result<Vec<(String, RobustnessSpec)>> {
        if self.robustness.is_empty() {
            return Ok(vec![("identity".into(), RobustnessSpec::identity())]);
        }
        self.robustness
            .iter()
            .enumerate()
            .map(|(i, r)| Ok((r.display_name(i), r.spec(seed, i)?)))
            .collect()
    }
}

/// Loaded once per run; synthetic sources are drawn per seed.
#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic,
    Table(Dataset),
}

pub fn load_source(cfg: &ExperimentConfig) -> Result<DataSource> {
    match &cfg.data {
        DataConfig::Csv {
            path,
            label_column,
            weight_column,
            delimiter,
            has_header,
            label_mapping,
        } => {
            let schema = CsvSchema {
                label_column: label_column.clone(),
                weight_column: weight_column.clone(),
                delimiter: *delimiter,
                has_header: *has_header,
                label_mapping: *label_mapping,
                n_labels: None,
            };
            Ok(DataSource::Table(io::load_csv(path, &schema)?))
        }
        _ => Ok(DataSource::Synthetic),
    }
}

fn draw(cfg: &DataConfig, n: usize, seed: u64) -> Result<Dataset> {
    match cfg {
        DataConfig::SyntheticCurve {
            noise_fraction,
            curve_frequency,
            ..
        } => Ok(io::synthetic_curve(
            &CurveParams {
                n,
                noise_fraction: *noise_fraction,
                frequency: *curve_frequency,
            },
            seed,
        )?
        .dataset),
        DataConfig::SyntheticBlobs { k, dim, separation, .. } => io::synthetic_blobs(
            &BlobParams {
                n,
                k: *k,
                dim: *dim,
                separation: *separation,
            },
            seed,
        ),
        DataConfig::Csv { .. } => unreachable!("tables are not drawn"),
    }
}

fn train_test(d: Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    match split(&d, spec)? {
        Partition::TrainTest { train, test } => Ok((train, test)),
        Partition::Folds(_) => unreachable!(),
    }
}

/// Training and test sets for one seed.
pub fn seed_data(cfg: &ExperimentConfig, source: &DataSource, seed: u64) -> Result<(Dataset, Dataset)> {
    match source {
        DataSource::Table(d) => train_test(d.clone(), &cfg.split_spec(seed)),
        DataSource::Synthetic => {
            let (n, test_n) = match cfg.data {
                DataConfig::SyntheticCurve { n, test_n, .. } | DataConfig::SyntheticBlobs { n, test_n, .. } => {
                    (n, test_n)
                }
                DataConfig::Csv { .. } => unreachable!(),
            };
            let all = draw(&cfg.data, n, rng::child_seed(seed, streams::TRAIN_DRAW))?;
            match test_n {
                Some(m) => Ok((all, draw(&cfg.data, m, rng::child_seed(seed, streams::TEST_DRAW))?)),
                None => train_test(all, &cfg.split_spec(seed)),
            }
        }
    }
}

/// Halves `train` for the disjoint CM/TM protocol: `(cm part, tm part)`.
fn halve(train: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    train_test(train.clone(), &SplitSpec::holdout(0.5, rng::child_seed(seed, streams::CM_SPLIT)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub cm_test_error: f64,
    /// `c` actually used (after tuning, when configured).
    pub c: f64,
    pub report: InterpretabilityReport,
}

/// One seed of the run pipeline: data, CM, baseline TM, transfer, robust
/// sets, evaluation.
pub fn run_seed(cfg: &ExperimentConfig, source: &DataSource, seed: u64) -> Result<SeedOutcome> {
    let (train, test) = seed_data(cfg, source, seed)?;
    let (cm_train, tm_train) = match cfg.split.cm_partition {
        CmPartition::Shared => (train.clone(), train),
        CmPartition::Disjoint => halve(&train, seed)?,
    };
    let cm = models::train(&cfg.cm, &cm_train, rng::child_seed(seed, streams::CM_TRAIN))?;
    let tm_seed = rng::child_seed(seed, streams::TM_TRAIN);
    let tm = models::train(&cfg.tm, &tm_train, tm_seed)?;
    let outcome = transfer::transfer_detailed(&cfg.tm, &cm, &tm_train, &cfg.transfer, tm_seed)?;
    let robust = cfg
        .robust_specs(seed)?
        .into_iter()
        .map(|(name, spec)| Ok((name, make_robust_set(&test, &spec)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut report = metrics::evaluate_multi(&tm, &outcome.model, &test, &robust, cfg.loss)?;
    report.provenance.seeds = vec![seed];
    report.provenance.procedure = cfg.transfer.procedure.name().to_string();
    report.provenance.cm_family = Some(cfg.cm.family.to_string());
    report
        .provenance
        .hashes
        .insert("train".into(), tm_train.content_hash());
    report.provenance.label_mapping = test.label_names().map(<[String]>::to_vec);
    Ok(SeedOutcome {
        seed,
        cm_test_error: empirical_error(&cm, &test, cfg.loss)?,
        c: outcome.c,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSeed {
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub delta: Option<Summary>,
    pub gamma: Option<Summary>,
    pub tm_test: Option<Summary>,
    #[serde(rename = "tmI_test")]
    pub tmi_test: Option<Summary>,
    pub tm_robust: Option<Summary>,
    #[serde(rename = "tmI_robust")]
    pub tmi_robust: Option<Summary>,
    pub cm_test: Option<Summary>,
}

/// Multi-seed run report. `delta` and `gamma` are medians over the seeds
/// where they are defined; `errors` are means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub errors: metrics::Errors,
    pub loss: LossKind,
    pub flags: Vec<String>,
    pub aggregate: Aggregate,
    pub provenance: metrics::Provenance,
    pub per_seed: Vec<SeedOutcome>,
    pub failed_seeds: Vec<FailedSeed>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs every seed (up to `jobs` at once) and merges results in seed order.
/// Fails only when every seed fails.
pub fn run(cfg: &ExperimentConfig, jobs: usize) -> Result<RunReport> {
    let source = load_source(cfg)?;
    let results: Vec<(u64, Result<SeedOutcome>)> = pool(jobs.max(1))?.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&s| (s, run_seed(cfg, &source, s)))
            .collect()
    });
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => {
                log::error!("seed {seed}: {e}");
                failed.push(FailedSeed {
                    seed,
                    reason: e.to_string(),
                });
            }
        }
    }
    if ok.is_empty() {
        let reasons: Vec<String> = failed.iter().map(|f| format!("seed {}: {}", f.seed, f.reason)).collect();
        return Err(Error::Training(format!("every seed failed ({})", reasons.join("; "))));
    }
    Ok(assemble(cfg, ok, failed))
}

fn assemble(cfg: &ExperimentConfig, ok: Vec<SeedOutcome>, failed: Vec<FailedSeed>) -> RunReport {
    let col = |f: &dyn Fn(&SeedOutcome) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(f).collect() };
    let deltas = col(&|o| o.report.delta);
    let gammas = col(&|o| o.report.gamma);
    let e = |f: fn(&metrics::Errors) -> f64| col(&|o| Some(f(&o.report.errors)));
    let aggregate = Aggregate {
        delta: metrics::summarize(&deltas),
        gamma: metrics::summarize(&gammas),
        tm_test: metrics::summarize(&e(|x| x.tm_test)),
        tmi_test: metrics::summarize(&e(|x| x.tmi_test)),
        tm_robust: metrics::summarize(&e(|x| x.tm_robust)),
        tmi_robust: metrics::summarize(&e(|x| x.tmi_robust)),
        cm_test: metrics::summarize(&col(&|o| Some(o.cm_test_error))),
    };
    let mean = |s: &Option<Summary>| s.map_or(f64::NAN, |s| s.mean);
    let mut flags: Vec<String> = Vec::new();
    for o in &ok {
        for f in &o.report.flags {
            if !flags.contains(f) {
                flags.push(f.clone());
            }
        }
    }
    if deltas.len() < ok.len() {
        flags.push(format!("delta undefined for {} seeds", ok.len() - deltas.len()));
    }
    let mut hashes = std::collections::BTreeMap::new();
    for o in &ok {
        for (k, v) in &o.report.provenance.hashes {
            hashes.insert(format!("seed{}:{k}", o.seed), v.clone());
        }
    }
    RunReport {
        delta: aggregate.delta.map(|s| s.median),
        gamma: aggregate.gamma.map(|s| s.median),
        errors: metrics::Errors {
            tm_test: mean(&aggregate.tm_test),
            tmi_test: mean(&aggregate.tmi_test),
            tm_robust: mean(&aggregate.tm_robust),
            tmi_robust: mean(&aggregate.tmi_robust),
        },
        loss: cfg.loss,
        flags,
        aggregate,
        provenance: metrics::Provenance {
            seeds: ok.iter().map(|o| o.seed).collect(),
            hashes,
            procedure: cfg.transfer.procedure.name().to_string(),
            tm_family: Some(cfg.tm.family.to_string()),
            cm_family: Some(cfg.cm.family.to_string()),
            label_mapping: ok[0].report.provenance.label_mapping.clone(),
            timestamp: None,
        },
        per_seed: ok,
        failed_seeds: failed,
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `seed,e_tm_test,e_tmI_test,e_tm_robust,e_tmI_robust,delta,gamma`, one row
/// per successful seed; robust columns refer to the first robustness set.
pub fn per_seed_csv(report: &RunReport) -> String {
    let mut s = String::from("seed,e_tm_test,e_tmI_test,e_tm_robust,e_tmI_robust,delta,gamma\n");
    for o in &report.per_seed {
        let e = &o.report.errors;
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            o.seed,
            fmt_f64(e.tm_test),
            fmt_f64(e.tmi_test),
            fmt_f64(e.tm_robust),
            fmt_f64(e.tmi_robust),
            opt_cell(o.report.delta),
            opt_cell(o.report.gamma)
        ));
    }
    s
}

/// Writes `report.json` and `per_seed.csv` into `dir`.
pub fn write_run(report: &RunReport, dir: &Path, timestamp: Option<u64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut r = report.clone();
    r.provenance.timestamp = timestamp;
    fs::write(dir.join("report.json"), crate::serial::to_json(&r)?)?;
    fs::write(dir.join("per_seed.csv"), per_seed_csv(report))?;
    Ok(())
}

pub const HIST_BINS: usize = 10;

/// Fractions of `values` (already scaled to `[0, 1]`) in ten equal bins; the
/// last bin is closed.
pub fn histogram(values: &[f64]) -> [f64; HIST_BINS] {
    let mut h = [0.0; HIST_BINS];
    if values.is_empty() {
        return h;
    }
    for &v in values {
        let b = ((v * HIST_BINS as f64).floor() as isize).clamp(0, HIST_BINS as isize - 1) as usize;
        h[b] += 1.0;
    }
    h.iter_mut().for_each(|x| *x /= values.len() as f64);
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub cm_capacity: f64,
    pub cm_error: f64,
    pub tm_error: f64,
    #[serde(rename = "tmI_error")]
    pub tmi_error: f64,
    pub delta: Option<f64>,
    /// Row-weight histogram, weights divided by the procedure's maximum
    /// weight (1 for mle_weighting, c for erm_a, 1/2 for erm_b).
    pub weight_hist: [f64; HIST_BINS],
}

fn sweep_seed(cfg: &ExperimentConfig, sweep: &SweepConfig, source: &DataSource, seed: u64) -> Result<Vec<SweepRow>> {
    let (train, test) = seed_data(cfg, source, seed)?;
    let (cm_train, tm_train) = halve(&train, seed)?;
    let tm_seed = rng::child_seed(seed, streams::TM_TRAIN);
    let tm = models::train(&cfg.tm, &tm_train, tm_seed)?;
    let tm_error = empirical_error(&tm, &test, cfg.loss)?;
    sweep
        .values
        .iter()
        .map(|&v| {
            let cm_spec = cfg.cm.clone().with(&sweep.param, v);
            let cm = models::train(&cm_spec, &cm_train, rng::child_seed(seed, streams::CM_TRAIN))?;
            let out = transfer::transfer_detailed(&cfg.tm, &cm, &tm_train, &cfg.transfer, tm_seed)?;
            let tmi_error = empirical_error(&out.model, &test, cfg.loss)?;
            let scale = match cfg.transfer.procedure {
                Procedure::MleWeighting => 1.0,
                Procedure::ErmA => out.c,
                Procedure::ErmB => 0.5,
            };
            let w: Vec<f64> = out.set.rows().iter().map(|r| r.weight / scale).collect();
            Ok(SweepRow {
                seed,
                cm_capacity: v,
                cm_error: empirical_error(&cm, &test, cfg.loss)?,
                tm_error,
                tmi_error,
                delta: metrics::delta(tm_error, tmi_error)?,
                weight_hist: histogram(&w),
            })
        })
        .collect()
}

/// CM capacity sweep: per seed, CM on one half of the training rows, the
/// fixed TM on the other, one row per grid value.
pub fn sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("missing [sweep] section".into()))?;
    let source = load_source(cfg)?;
    let per_seed: Vec<Result<Vec<SweepRow>>> =
        pool(jobs.max(1))?.install(|| cfg.seeds.par_iter().map(|&s| sweep_seed(cfg, sw, &source, s)).collect());
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("seed,cm_capacity,cm_error,tm_error,tmI_error,delta");
    for b in 0..HIST_BINS {
        s.push_str(&format!(",w_bin{b}"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}",
            r.seed,
            fmt_f64(r.cm_capacity),
            fmt_f64(r.cm_error),
            fmt_f64(r.tm_error),
            fmt_f64(r.tmi_error),
            opt_cell(r.delta)
        ));
        for h in r.weight_hist {
            s.push(',');
            s.push_str(&fmt_f64(h));
        }
        s.push('\n');
    }
    s
}

/// Writes `sweep.csv` and `sweep.json` into `dir`.
pub fn write_sweep(rows: &[SweepRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.csv"), sweep_csv(rows))?;
    fs::write(dir.join("sweep.json"), crate::serial::to_json(rows)?)?;
    Ok(())
}
