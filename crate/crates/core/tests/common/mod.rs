// SPDX-License-Identifier: Apache-2.0
#![allow(dead_code)]

use delta_interp_core::io::{synthetic_curve, CurveParams};
use delta_interp_core::{Dataset, Matrix};

pub fn curve(n: usize, seed: u64) -> Dataset {
    synthetic_curve(&CurveParams::new(n, 0.05), seed).unwrap().dataset
}

pub fn tiny(xs: &[&[f64]], labels: &[usize], k: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = xs.iter().map(|r| r.to_vec()).collect();
    Dataset::new(Matrix::from_rows(&rows).unwrap(), labels.to_vec(), k).unwrap()
}
