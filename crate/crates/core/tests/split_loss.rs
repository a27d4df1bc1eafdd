// SPDX-License-Identifier: Apache-2.0

mod common;

use delta_interp_core::models::{cross_validated_error, ModelSpec};
use delta_interp_core::split::{split, split_indices, Partition, SplitIndices, SplitSpec};
use delta_interp_core::{Error, Family, LossKind};

#[test]
fn holdout_of_100_at_0_3() {
    let SplitIndices::TrainTest { train, test } = split_indices(100, &SplitSpec::holdout(0.3, 7)).unwrap() else {
        panic!("train/test expected");
    };
    assert_eq!((train.len(), test.len()), (70, 30));
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());
}

#[test]
fn holdout_floor_and_determinism() {
    let a = split_indices(10, &SplitSpec::holdout(0.29, 1)).unwrap();
    let b = split_indices(10, &SplitSpec::holdout(0.29, 1)).unwrap();
    assert_eq!(a, b);
    let SplitIndices::TrainTest { test, .. } = a else { panic!() };
    assert_eq!(test.len(), 2);
    let c = split_indices(1000, &SplitSpec::holdout(0.3, 2)).unwrap();
    assert_ne!(c, split_indices(1000, &SplitSpec::holdout(0.3, 3)).unwrap());
}

#[test]
fn sequential_keeps_order() {
    let SplitIndices::TrainTest { train, test } = split_indices(10, &SplitSpec::sequential(0.8)).unwrap() else {
        panic!()
    };
    assert_eq!(train, (0..8).collect::<Vec<_>>());
    assert_eq!(test, vec![8, 9]);
}

#[test]
fn kfold_sizes_and_disjointness() {
    let SplitIndices::Folds(f) = split_indices(11, &SplitSpec::kfold(3, 0)).unwrap() else { panic!() };
    let sizes: Vec<usize> = f.iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![4, 4, 3]);
    let mut all: Vec<usize> = f.concat();
    all.sort_unstable();
    assert_eq!(all, (0..11).collect::<Vec<_>>());
}

#[test]
fn bad_splits() {
    assert!(matches!(split_indices(0, &SplitSpec::holdout(0.3, 0)), Err(Error::EmptyDataset)));
    assert!(matches!(split_indices(1, &SplitSpec::holdout(0.3, 0)), Err(Error::InvalidSplit(_))));
    assert!(matches!(split_indices(10, &SplitSpec::holdout(0.0, 0)), Err(Error::InvalidSplit(_))));
    assert!(matches!(split_indices(10, &SplitSpec::holdout(1.0, 0)), Err(Error::InvalidSplit(_))));
    assert!(matches!(split_indices(3, &SplitSpec::holdout(0.2, 0)), Err(Error::InvalidSplit(_))));
    assert!(matches!(split_indices(3, &SplitSpec::kfold(5, 0)), Err(Error::InvalidSplit(_))));
    assert!(matches!(split_indices(3, &SplitSpec::kfold(1, 0)), Err(Error::InvalidSplit(_))));
}

#[test]
fn split_datasets_match_indices() {
    let d = common::curve(50, 1);
    let Partition::TrainTest { train, test } = split(&d, &SplitSpec::holdout(0.2, 4)).unwrap() else { panic!() };
    assert_eq!(train.len() + test.len(), 50);
    assert_eq!(test.len(), 10);
}

#[test]
fn loss_values() {
    assert_eq!(LossKind::ZeroOne.eval(2, 2), 0.0);
    assert_eq!(LossKind::ZeroOne.eval(1, 0), 1.0);
    assert_eq!(LossKind::AbsoluteError.eval(3, 1), 2.0);
    assert_eq!(LossKind::AbsoluteError.eval(1, 3), 2.0);
}

#[test]
fn cross_validation_is_deterministic_and_bounded() {
    let d = common::curve(300, 5);
    let spec = ModelSpec::new(Family::DecisionTree).with("max_depth", 4.0);
    let a = cross_validated_error(&spec, &d, 5, LossKind::ZeroOne, 9).unwrap();
    let b = cross_validated_error(&spec, &d, 5, LossKind::ZeroOne, 9).unwrap();
    assert_eq!(a, b);
    assert!((0.0..0.3).contains(&a), "cv error {a}");
}
