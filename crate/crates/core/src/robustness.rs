// SPDX-License-Identifier: Apache-2.0

//! Generators for the robustness sample: seeded `Dataset -> Dataset` maps.

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobustnessKind {
    Identity,
    /// Exactly `round(fraction * n)` rows get a different label.
    LabelFlip { fraction: f64 },
    /// I.i.d. `N(0, sigma^2)` added to every feature.
    FeatureNoise { sigma: f64 },
    /// Keep only rows with this label.
    ClassSkew { label: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSpec {
    #[serde(flatten)]
    pub kind: RobustnessKind,
    #[serde(default)]
    pub seed: u64,
}

impl RobustnessSpec {
    pub fn new(kind: RobustnessKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn identity() -> Self {
        Self::new(RobustnessKind::Identity, 0)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            RobustnessKind::LabelFlip { fraction } if !(0.0..=1.0).contains(&fraction) => Err(Error::InvalidArgument(
                format!("label_flip fraction {fraction} outside [0, 1]"),
            )),
            RobustnessKind::FeatureNoise { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::InvalidArgument(format!("feature_noise sigma {sigma} must be >= 0")))
            }
            _ => Ok(()),
        }
    }

    /// Short label for reports, e.g. `label_flip(0.1)`.
    pub fn label(&self) -> String {
        match self.kind {
            RobustnessKind::Identity => "identity".into(),
            RobustnessKind::LabelFlip { fraction } => format!("label_flip({fraction})"),
            RobustnessKind::FeatureNoise { sigma } => format!("feature_noise({sigma})"),
            RobustnessKind::ClassSkew { label } => format!("class_skew({label})"),
        }
    }
}

pub fn make_robust_set(test: &Dataset, spec: &RobustnessSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut r = rng::substream(spec.seed, rng::streams::ROBUST);
    match spec.kind {
        RobustnessKind::Identity => Ok(test.clone()),
        RobustnessKind::LabelFlip { fraction } => {
            let n = test.len();
            let k = test.n_labels();
            let count = (fraction * n as f64).round() as usize;
            let mut labels = test.labels().to_vec();
            let mut rows = sample(&mut r, n, count.min(n)).into_vec();
            rows.sort_unstable();
            for i in rows {
                let j = r.random_range(0..k - 1);
                labels[i] = if j >= labels[i] { j + 1 } else { j };
            }
            test.with_labels(labels)
        }
        RobustnessKind::FeatureNoise { sigma } => {
            if sigma == 0.0 {
                return Ok(test.clone());
            }
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut x = test.features().clone();
            for v in x.as_mut_slice() {
                *v += normal.sample(&mut r);
            }
            test.with_features(x)
        }
        RobustnessKind::ClassSkew { label } => {
            if label >= test.n_labels() {
                return Err(Error::InvalidArgument(format!(
                    "class_skew label {label} but the data has {} labels",
                    test.n_labels()
                )));
            }
            let idx: Vec<usize> = (0..test.len()).filter(|&i| test.labels()[i] == label).collect();
            if idx.is_empty() {
                return Err(Error::InvalidArgument(format!("class_skew: label {label} does not occur")));
            }
            Ok(test.subset(&idx))
        }
    }
}
