// SPDX-License-Identifier: Apache-2.0

mod common;

use std::f64::consts::PI;
use std::fs;

use delta_interp_core::io::synth::{blob_means, boundary, in_noise_region, DEFAULT_CURVE_FREQUENCY};
use delta_interp_core::io::{
    fico_expand, load_csv, read_raw, save_csv, synthetic_blobs, synthetic_curve, BlobParams, CsvSchema, CurveParams,
    LabelMapping,
};
use delta_interp_core::Error;

#[test]
fn csv_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    let d = common::curve(100, 1);
    let d = d.clone().with_weights((0..100).map(|i| 0.1 * i as f64 + 1.0 / 3.0).collect()).unwrap();
    let mut schema = CsvSchema::new("label");
    schema.label_mapping = LabelMapping::Integer;
    schema.weight_column = Some("w".into());
    save_csv(&d, &p, &schema).unwrap();
    let back = load_csv(&p, &schema).unwrap();
    assert_eq!(back.features(), d.features());
    assert_eq!(back.labels(), d.labels());
    assert_eq!(back.weights(), d.weights());
}

#[test]
fn named_labels_and_semicolons() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.csv");
    fs::write(&p, "a;b;y\n1;2;yes\n3;4;no\n5;6;yes\n").unwrap();
    let mut schema = CsvSchema::new("y");
    schema.delimiter = ';';
    let d = load_csv(&p, &schema).unwrap();
    assert_eq!(d.labels(), &[0, 1, 0]);
    assert_eq!(d.label_names().unwrap(), &["yes".to_string(), "no".to_string()]);
    assert_eq!(d.x(2), &[5.0, 6.0]);
    let out = dir.path().join("o.csv");
    save_csv(&d, &out, &schema).unwrap();
    assert_eq!(load_csv(&out, &schema).unwrap(), d);
}

#[test]
fn csv_errors_carry_positions() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    fs::write(&p, "a,b,y\n1,2,0\n3,oops,1\n").unwrap();
    let e = load_csv(&p, &CsvSchema::new("y")).unwrap_err();
    match e {
        Error::Parse { line, column, .. } => {
            assert_eq!(line, 3);
            assert_eq!(column, "b");
        }
        other => panic!("unexpected {other:?}"),
    }
    fs::write(&p, "a,y,w\n1,0,-2\n").unwrap();
    let mut s = CsvSchema::new("y");
    s.weight_column = Some("w".into());
    assert!(matches!(load_csv(&p, &s), Err(Error::Parse { line: 2, .. })));
    assert!(load_csv(&p, &CsvSchema::new("missing")).is_err());
    assert!(load_csv(dir.path().join("none.csv"), &CsvSchema::new("y")).is_err());
}

#[test]
fn fico_expansion_cases() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.csv");
    fs::write(
        &p,
        "RiskPerformance,ExternalRiskEstimate,MSinceOldestTradeOpen\n\
         Bad,55,-8\n\
         Good,-7,144\n\
         Bad,-9,-9\n\
         Good,-9,20\n",
    )
    .unwrap();
    let t = read_raw(&p, ',', true).unwrap();
    let ex = fico_expand(&t, "RiskPerformance", LabelMapping::FirstAppearance).unwrap();
    assert_eq!(ex.dropped_rows, 1);
    assert_eq!(ex.mixed_minus9_rows, 1);
    let d = &ex.dataset;
    assert_eq!(d.dim(), 6);
    assert_eq!(d.x(0), &[0.0, 0.0, 55.0, 0.0, 1.0, 0.0]);
    assert_eq!(d.x(1), &[1.0, 0.0, 0.0, 0.0, 0.0, 144.0]);
    // the mixed row keeps its -9 as an ordinary value
    assert_eq!(d.x(2), &[0.0, 0.0, -9.0, 0.0, 0.0, 20.0]);
    assert_eq!(d.labels(), &[0, 1, 1]);
    let names = d.feature_names().unwrap();
    assert_eq!(names[0], "ExternalRiskEstimate_is7");
    assert!(fico_expand(&t, "nope", LabelMapping::FirstAppearance).is_err());
}

#[test]
fn curve_flips_only_in_the_corner() {
    let p = CurveParams::new(2000, 0.01);
    let draw = synthetic_curve(&p, 4).unwrap();
    assert_eq!(draw.flipped.len(), 20);
    let d = &draw.dataset;
    for i in 0..d.len() {
        let x = d.x(i);
        let clean = usize::from(x[1] > boundary(x[0], DEFAULT_CURVE_FREQUENCY));
        let flipped = draw.flipped.binary_search(&i).is_ok();
        assert_eq!(d.labels()[i] != clean, flipped);
        if flipped {
            assert!(in_noise_region(x));
        }
    }
    assert_eq!(synthetic_curve(&p, 4).unwrap().dataset, draw.dataset);
    assert!(synthetic_curve(&CurveParams::new(5, 0.0), 0).is_err());
    assert!(synthetic_curve(&CurveParams::new(100, 1.5), 0).is_err());
}

fn phi(x: f64, y: f64, m: &[f64]) -> f64 {
    (-0.5 * ((x - m[0]).powi(2) + (y - m[1]).powi(2))).exp() / (2.0 * PI)
}

#[test]
fn blobs_match_bayes_error_by_quadrature() {
    let p = BlobParams {
        n: 60_000,
        k: 3,
        dim: 2,
        separation: 2.0,
    };
    let means = blob_means(&p);
    for a in 0..3 {
        for b in a + 1..3 {
            let d = ((means[a][0] - means[b][0]).powi(2) + (means[a][1] - means[b][1]).powi(2)).sqrt();
            assert!((d - 2.0).abs() < 1e-12);
        }
    }
    // Bayes accuracy: integral of max_k phi_k / K on a fine grid
    let h = 0.02;
    let mut acc = 0.0;
    let mut x = -8.0;
    while x < 8.0 {
        let mut y = -8.0;
        while y < 8.0 {
            let best = means.iter().map(|m| phi(x + h / 2.0, y + h / 2.0, m)).fold(0.0, f64::max);
            acc += best / 3.0 * h * h;
            y += h;
        }
        x += h;
    }
    let bayes = 1.0 - acc;

    let d = synthetic_blobs(&p, 7).unwrap();
    let wrong = (0..d.len())
        .filter(|&i| {
            let x = d.x(i);
            let nearest = (0..3)
                .min_by(|&a, &b| {
                    let da = (x[0] - means[a][0]).powi(2) + (x[1] - means[a][1]).powi(2);
                    let db = (x[0] - means[b][0]).powi(2) + (x[1] - means[b][1]).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap();
            nearest != d.labels()[i]
        })
        .count();
    let est = wrong as f64 / d.len() as f64;
    let se = (bayes * (1.0 - bayes) / d.len() as f64).sqrt();
    assert!((est - bayes).abs() <= 3.0 * se, "empirical {est}, bayes {bayes}");
    assert_eq!(d.labels()[..6], [0, 1, 2, 0, 1, 2]);
}

#[test]
fn blob_errors() {
    let bad = |k, dim, sep, n| synthetic_blobs(&BlobParams { n, k, dim, separation: sep }, 0).is_err();
    assert!(bad(1, 2, 1.0, 10));
    assert!(bad(2, 0, 1.0, 10));
    assert!(bad(2, 2, 0.0, 10));
    assert!(bad(5, 2, 1.0, 3));
    let line = synthetic_blobs(&BlobParams { n: 10, k: 2, dim: 1, separation: 3.0 }, 0).unwrap();
    assert_eq!(line.dim(), 1);
}
