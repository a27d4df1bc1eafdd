// SPDX-License-Identifier: Apache-2.0

//! Train/test partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitKind {
    /// Random split; `fraction` is the share of rows held out for testing.
    Holdout { fraction: f64 },
    /// `folds` random, pairwise disjoint folds.
    Kfold { folds: usize },
    /// Order-preserving split; `fraction` is the share of leading rows used
    /// for training.
    Sequential { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    #[serde(flatten)]
    pub kind: SplitKind,
    #[serde(default)]
    pub seed: u64,
}

impl SplitSpec {
    pub fn holdout(fraction: f64, seed: u64) -> Self {
        Self {
            kind: SplitKind::Holdout { fraction },
            seed,
        }
    }

    pub fn kfold(folds: usize, seed: u64) -> Self {
        Self {
            kind: SplitKind::Kfold { folds },
            seed,
        }
    }

    pub fn sequential(fraction: f64) -> Self {
        Self {
            kind: SplitKind::Sequential { fraction },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SplitKind::Holdout { fraction } | SplitKind::Sequential { fraction } => {
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(Error::InvalidSplit(format!("fraction {fraction} not in (0, 1)")));
                }
            }
            SplitKind::Kfold { folds } => {
                if folds < 2 {
                    return Err(Error::InvalidSplit(format!("need at least 2 folds, got {folds}")));
                }
            }
        }
        Ok(())
    }
}

/// Row indices of each partition.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitIndices {
    TrainTest { train: Vec<usize>, test: Vec<usize> },
    Folds(Vec<Vec<usize>>),
}

/// Output of [`split`].
#[derive(Debug, Clone)]
pub enum Partition {
    TrainTest { train: Dataset, test: Dataset },
    Folds(Vec<Dataset>),
}

/// `floor(fraction * n)`, nudged so that products like `0.29 * 100` that land a
/// hair under an integer still count as that integer.
pub fn floor_count(fraction: f64, n: usize) -> usize {
    (fraction * n as f64 + 1e-9).floor() as usize
}

pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if n < 2 {
        return Err(Error::InvalidSplit(format!("cannot split {n} row")));
    }
    match spec.kind {
        SplitKind::Holdout { fraction } => {
            let n_test = floor_count(fraction, n);
            if n_test == 0 || n_test == n {
                return Err(Error::InvalidSplit(format!(
                    "fraction {fraction} of {n} rows leaves an empty partition"
                )));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::substream(spec.seed, rng::streams::SPLIT));
            let mut test = order[..n_test].to_vec();
            let mut train = order[n_test..].to_vec();
            test.sort_unstable();
            train.sort_unstable();
            Ok(SplitIndices::TrainTest { train, test })
        }
        SplitKind::Sequential { fraction } => {
            let n_train = floor_count(fraction, n);
            if n_train == 0 || n_train == n {
                return Err(Error::InvalidSplit(format!(
                    "fraction {fraction} of {n} rows leaves an empty partition"
                )));
            }
            Ok(SplitIndices::TrainTest {
                train: (0..n_train).collect(),
                test: (n_train..n).collect(),
            })
        }
        SplitKind::Kfold { folds } => {
            if n < folds {
                return Err(Error::InvalidSplit(format!("{folds} folds need at least {folds} rows, got {n}")));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng::substream(spec.seed, rng::streams::SPLIT));
            let base = n / folds;
            let extra = n % folds;
            let mut out = Vec::with_capacity(folds);
            let mut start = 0;
            for f in 0..folds {
                let len = base + usize::from(f < extra);
                let mut fold = order[start..start + len].to_vec();
                fold.sort_unstable();
                out.push(fold);
                start += len;
            }
            Ok(SplitIndices::Folds(out))
        }
    }
}

/// Partitions `data` according to `spec`.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<Partition> {
    Ok(match split_indices(data.len(), spec)? {
        SplitIndices::TrainTest { train, test } => Partition::TrainTest {
            train: data.subset(&train),
            test: data.subset(&test),
        },
        SplitIndices::Folds(folds) => Partition::Folds(folds.iter().map(|f| data.subset(f)).collect()),
    })
}

/// Indices of all folds except `held_out`, concatenated in fold order.
pub fn complement(folds: &[Vec<usize>], held_out: usize) -> Vec<usize> {
    folds
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != held_out)
        .flat_map(|(_, f)| f.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Matrix;
    use proptest::prelude::*;

    fn data(n: usize) -> Dataset {
        let x = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        Dataset::new(x, (0..n).map(|i| i % 2).collect(), 2).unwrap()
    }

    #[test]
    fn holdout_counts() {
        match split(&data(10), &SplitSpec::holdout(0.3, 7)).unwrap() {
            Partition::TrainTest { train, test } => {
                assert_eq!(train.len(), 7);
                assert_eq!(test.len(), 3);
                let mut all: Vec<f64> = train.features().as_slice().to_vec();
                all.extend_from_slice(test.features().as_slice());
                all.sort_by(f64::total_cmp);
                assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn sequential_counts_large() {
        match split_indices(100_023, &SplitSpec::sequential(0.7)).unwrap() {
            SplitIndices::TrainTest { train, test } => {
                assert_eq!(train.len(), 70_016);
                assert_eq!(test.len(), 30_007);
                assert_eq!(train[0], 0);
                assert_eq!(test[0], 70_016);
                assert!(train.windows(2).all(|w| w[0] + 1 == w[1]));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn kfold_equal_folds() {
        match split_indices(25, &SplitSpec::kfold(5, 1)).unwrap() {
            SplitIndices::Folds(f) => {
                assert_eq!(f.len(), 5);
                assert!(f.iter().all(|x| x.len() == 5));
                let mut all: Vec<usize> = f.concat();
                all.sort_unstable();
                assert_eq!(all, (0..25).collect::<Vec<_>>());
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(split_indices(0, &SplitSpec::holdout(0.5, 0)), Err(Error::EmptyDataset)));
        assert!(split_indices(10, &SplitSpec::holdout(0.05, 0)).is_err());
        assert!(split_indices(10, &SplitSpec::holdout(1.0, 0)).is_err());
        assert!(split_indices(3, &SplitSpec::kfold(4, 0)).is_err());
        assert!(split_indices(3, &SplitSpec::kfold(1, 0)).is_err());
        assert!(split_indices(1, &SplitSpec::sequential(0.5)).is_err());
    }

    #[test]
    fn floor_rule_robust_to_rounding() {
        assert_eq!(floor_count(0.29, 100), 29);
        assert_eq!(floor_count(0.3, 10), 3);
    }

    proptest! {
        #[test]
        fn holdout_is_partition_and_reproducible(n in 2usize..300, f in 0.05f64..0.95, seed in any::<u64>()) {
            let spec = SplitSpec::holdout(f, seed);
            if let Ok(SplitIndices::TrainTest { train, test }) = split_indices(n, &spec) {
                let mut all = train.clone();
                all.extend(&test);
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(split_indices(n, &spec).unwrap(), SplitIndices::TrainTest { train, test });
            }
        }

        #[test]
        fn kfold_is_partition(n in 2usize..200, k in 2usize..10, seed in any::<u64>()) {
            prop_assume!(n >= k);
            if let SplitIndices::Folds(f) = split_indices(n, &SplitSpec::kfold(k, seed)).unwrap() {
                let mut all: Vec<usize> = f.concat();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                let (lo, hi) = (f.iter().map(Vec::len).min().unwrap(), f.iter().map(Vec::len).max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
        }
    }
}
