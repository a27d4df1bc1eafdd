// SPDX-License-Identifier: Apache-2.0

mod common;

use delta_interp_core::models::{empirical_error, train, train_weighted, Params, TrainOptions, TrainedModel};
use delta_interp_core::transfer::{WeightedRow, WeightedTrainingSet};
use delta_interp_core::{Error, Family, LossKind, ModelSpec};

fn theta(m: &TrainedModel) -> Vec<f64> {
    match &m.params {
        Params::Linear { theta } => theta.clone(),
        _ => panic!("linear model expected"),
    }
}

/// Small, fast settings for every family.
fn quick(fam: Family) -> ModelSpec {
    let s = ModelSpec::new(fam);
    match fam {
        Family::RandomForest => s.with("n_trees", 5.0),
        Family::LinearMle | Family::LinearErmHinge | Family::Mlp1 => s.with("max_iter", 300.0),
        _ => s,
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn unit_weights_match_no_weights_bitwise() {
    let d = common::curve(400, 3);
    for fam in [Family::LinearMle, Family::LinearErmHinge, Family::DecisionTree, Family::Knn] {
        let spec = ModelSpec::new(fam);
        let a = train(&spec, &d, 1).unwrap();
        let b = train(&spec, &d.clone().with_weights(vec![1.0; d.len()]).unwrap(), 1).unwrap();
        assert_eq!(a.params, b.params, "{fam}");
    }
}

#[test]
fn uniform_weight_scaling_is_invariant() {
    let d = common::curve(400, 4);
    for fam in [Family::LinearMle, Family::LinearErmHinge] {
        let spec = ModelSpec::new(fam);
        let a = train(&spec, &d, 1).unwrap();
        let b = train(&spec, &d.clone().with_weights(vec![0.3; d.len()]).unwrap(), 1).unwrap();
        assert!(max_diff(&theta(&a), &theta(&b)) <= 1e-8, "{fam}");
    }
    let tree = ModelSpec::new(Family::DecisionTree);
    let a = train(&tree, &d, 1).unwrap();
    let b = train(&tree, &d.clone().with_weights(vec![7.0; d.len()]).unwrap(), 1).unwrap();
    assert_eq!(a.predict(d.features()).unwrap(), b.predict(d.features()).unwrap());
}

#[test]
fn integer_weight_equals_duplicated_rows() {
    let d = common::curve(200, 6);
    let w: Vec<f64> = (0..d.len()).map(|i| if i % 3 == 0 { 2.0 } else { 1.0 }).collect();
    let dup_idx: Vec<usize> = (0..d.len()).flat_map(|i| std::iter::repeat_n(i, w[i] as usize)).collect();
    let spec = ModelSpec::new(Family::LinearMle);
    let a = train(&spec, &d.clone().with_weights(w).unwrap(), 0).unwrap();
    let b = train(&spec, &d.subset(&dup_idx), 0).unwrap();
    assert!(max_diff(&theta(&a), &theta(&b)) <= 1e-6);
}

#[test]
fn zero_weight_rows_are_ignored() {
    let d = common::curve(200, 7);
    let spec = ModelSpec::new(Family::LinearMle);
    let keep: Vec<usize> = (0..150).collect();
    let mut w = vec![1.0; 200];
    w[150..].iter_mut().for_each(|v| *v = 0.0);
    let a = train(&spec, &d.clone().with_weights(w).unwrap(), 0).unwrap();
    let b = train(&spec, &d.subset(&keep), 0).unwrap();
    // standardization statistics differ, predictions must agree
    let test = common::curve(2000, 70);
    let pa = a.predict(test.features()).unwrap();
    let pb = b.predict(test.features()).unwrap();
    let agree = pa.iter().zip(&pb).filter(|(x, y)| x == y).count();
    assert!(agree as f64 / 2000.0 > 0.99);
}

#[test]
fn knn_k1_recovers_training_labels() {
    let d = common::curve(300, 8);
    let m = train(&ModelSpec::new(Family::Knn).with("k", 1.0), &d, 0).unwrap();
    assert_eq!(empirical_error(&m, &d, LossKind::ZeroOne).unwrap(), 0.0);
}

#[test]
fn confidences_are_distributions() {
    let d = common::curve(300, 9);
    for fam in Family::ALL {
        let m = train(&quick(fam), &d, 0).unwrap();
        let c = m.confidence(d.features()).unwrap();
        for i in 0..c.len() {
            let r = c.row(i);
            assert!(r.iter().all(|v| (0.0..=1.0).contains(v)), "{fam}");
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{fam}");
        }
    }
}

#[test]
fn prediction_ties_go_to_lowest_label() {
    let d = common::tiny(&[&[0.0], &[1.0]], &[0, 1], 2);
    let m = TrainedModel {
        spec: ModelSpec::new(Family::LinearMle),
        n_labels: 2,
        feature_dim: 1,
        params: Params::Linear { theta: vec![0.0; 4] },
        fit: None,
    };
    assert_eq!(m.predict(d.features()).unwrap(), vec![0, 0]);
    let h = TrainedModel {
        spec: ModelSpec::new(Family::LinearErmHinge),
        ..m
    };
    assert_eq!(h.predict(d.features()).unwrap(), vec![0, 0]);
}

#[test]
fn hinge_pseudo_confidence_orders_like_risk() {
    let d = common::curve(300, 10);
    let m = train(&ModelSpec::new(Family::LinearErmHinge), &d, 0).unwrap();
    for i in 0..50 {
        let r = m.risks_row(d.x(i)).unwrap();
        let c = m.confidence_row(d.x(i));
        assert_eq!(r[0] < r[1], c[0] > c[1]);
    }
}

#[test]
fn json_round_trip() {
    let d = common::curve(200, 11);
    for fam in Family::ALL {
        let m = train(&quick(fam), &d, 0).unwrap();
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m.predict(d.features()).unwrap(), back.predict(d.features()).unwrap(), "{fam}");
        assert_eq!(m.params, back.params, "{fam}");
    }
}

#[test]
fn linear_accuracy_on_curve() {
    for seed in 0..3 {
        let m = train(&ModelSpec::new(Family::LinearMle), &common::curve(1000, seed), 0).unwrap();
        let acc = 1.0 - empirical_error(&m, &common::curve(4000, seed + 100), LossKind::ZeroOne).unwrap();
        assert!((0.70..=0.82).contains(&acc), "accuracy {acc}");
    }
}

#[test]
fn training_errors() {
    let d = common::curve(100, 12);
    assert!(matches!(
        train(&ModelSpec::new(Family::Knn).with("k", 0.0), &d, 0),
        Err(Error::InvalidHyperparam { .. })
    ));
    assert!(matches!(
        train(&ModelSpec::new(Family::LinearMle).with("nonsense", 1.0), &d, 0),
        Err(Error::InvalidHyperparam { .. })
    ));
    let zero = d.clone().with_weights(vec![0.0; d.len()]);
    if let Ok(z) = zero {
        assert!(train(&ModelSpec::new(Family::LinearMle), &z, 0).is_err());
    }
    let m = train(&ModelSpec::new(Family::LinearMle), &d, 0).unwrap();
    let wrong = common::tiny(&[&[0.0, 0.0, 0.0]], &[0], 2);
    assert!(matches!(m.predict(wrong.features()), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn explicit_rows_may_repeat_a_sample() {
    let d = common::curve(100, 13);
    let rows: Vec<WeightedRow> = (0..d.len())
        .flat_map(|i| {
            [
                WeightedRow { sample: i, label: 0, weight: 0.5 },
                WeightedRow { sample: i, label: 1, weight: 0.5 },
            ]
        })
        .collect();
    let set = WeightedTrainingSet::new(d.clone(), rows, "test").unwrap();
    let m = train_weighted(&ModelSpec::new(Family::LinearMle), &set, TrainOptions::default(), 0).unwrap();
    // equal soft labels everywhere: the fit is flat
    for i in 0..10 {
        let c = m.confidence_row(d.x(i));
        assert!((c[0] - 0.5).abs() < 1e-3, "{c:?}");
    }
}
