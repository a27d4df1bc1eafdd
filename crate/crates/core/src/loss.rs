// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

/// Evaluation loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Misclassification indicator.
    #[default]
    ZeroOne,
    /// `|predicted - actual|` on the numeric label value.
    AbsoluteError,
}

impl LossKind {
    pub fn eval(self, predicted: usize, actual: usize) -> f64 {
        match self {
            LossKind::ZeroOne => f64::from(u8::from(predicted != actual)),
            LossKind::AbsoluteError => (predicted as f64 - actual as f64).abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::AbsoluteError => "absolute_error",
        }
    }
}
