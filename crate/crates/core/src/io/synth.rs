// SPDX-License-Identifier: Apache-2.0

//! Synthetic generators: a 2-D curved boundary with corner label noise, and
//! Gaussian blobs.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::error::{Error, Result};
use crate::rng;

/// `b(x1) = 0.5 + 0.3 sin(frequency · π · x1)`.
pub const DEFAULT_CURVE_FREQUENCY: f64 = 3.0;

pub fn boundary(x1: f64, frequency: f64) -> f64 {
    0.5 + 0.3 * (frequency * PI * x1).sin()
}

/// Points eligible for corner noise: `x1 < 0.3` and `x2 > 0.7`.
pub fn in_noise_region(x: &[f64]) -> bool {
    x[0] < 0.3 && x[1] > 0.7
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveParams {
    pub n: usize,
    pub noise_fraction: f64,
    pub frequency: f64,
}

impl CurveParams {
    pub fn new(n: usize, noise_fraction: f64) -> Self {
        Self {
            n,
            noise_fraction,
            frequency: DEFAULT_CURVE_FREQUENCY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveDraw {
    pub dataset: Dataset,
    /// Sorted indices of rows whose label was flipped.
    pub flipped: Vec<usize>,
    /// `flipped.len() / n`; below the request when the corner is short of points.
    pub achieved_fraction: f64,
}

/// Uniform points on the unit square, label 1 iff above the curve, then
/// `floor(noise_fraction · n)` flips chosen uniformly among corner points.
pub fn synthetic_curve(p: &CurveParams, seed: u64) -> Result<CurveDraw> {
    if p.n < 10 {
        return Err(Error::InvalidArgument(format!("synthetic_curve needs n >= 10, got {}", p.n)));
    }
    if !(0.0..=1.0).contains(&p.noise_fraction) {
        return Err(Error::InvalidArgument(format!(
            "noise_fraction {} outside [0, 1]",
            p.noise_fraction
        )));
    }
    let mut r = rng::rng(seed);
    let mut x = Matrix::zeros(p.n, 2);
    let mut labels = Vec::with_capacity(p.n);
    for i in 0..p.n {
        let (a, b): (f64, f64) = (r.random(), r.random());
        x.set(i, 0, a);
        x.set(i, 1, b);
        labels.push(usize::from(b > boundary(a, p.frequency)));
    }
    let want = crate::split::floor_count(p.noise_fraction, p.n);
    let region: Vec<usize> = (0..p.n).filter(|&i| in_noise_region(x.row(i))).collect();
    let mut flipped: Vec<usize> = if want >= region.len() {
        if want > region.len() {
            log::warn!(
                "noise region holds {} points, fewer than the {want} requested; flipping all",
                region.len()
            );
        }
        region
    } else {
        sample(&mut r, region.len(), want).into_iter().map(|j| region[j]).collect()
    };
    flipped.sort_unstable();
    for &i in &flipped {
        labels[i] = 1 - labels[i];
    }
    let ds = Dataset::new(x, labels, 2)?.with_feature_names(vec!["x1".into(), "x2".into()])?;
    Ok(CurveDraw {
        achieved_fraction: flipped.len() as f64 / p.n as f64,
        dataset: ds,
        flipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobParams {
    pub n: usize,
    pub k: usize,
    pub dim: usize,
    pub separation: f64,
}

/// Cluster centers: for `d >= 2`, a regular `K`-gon in the first two
/// coordinates whose adjacent vertices are `separation` apart; for `d = 1`,
/// points `separation` apart on the line.
pub fn blob_means(p: &BlobParams) -> Vec<Vec<f64>> {
    (0..p.k)
        .map(|c| {
            let mut m = vec![0.0; p.dim];
            if p.dim == 1 {
                m[0] = c as f64 * p.separation;
            } else {
                let radius = p.separation / (2.0 * (PI / p.k as f64).sin());
                let angle = 2.0 * PI * c as f64 / p.k as f64;
                m[0] = radius * angle.cos();
                m[1] = radius * angle.sin();
            }
            m
        })
        .collect()
}

/// `K` unit-covariance Gaussian clusters; row `i` has label `i mod K`.
pub fn synthetic_blobs(p: &BlobParams, seed: u64) -> Result<Dataset> {
    if p.k < 2 || p.dim == 0 {
        return Err(Error::InvalidArgument("blobs need K >= 2 and d >= 1".into()));
    }
    if !(p.separation > 0.0 && p.separation.is_finite()) {
        return Err(Error::InvalidArgument(format!("separation must be positive, got {}", p.separation)));
    }
    if p.n < p.k {
        return Err(Error::InvalidArgument(format!("n = {} is fewer than K = {}", p.n, p.k)));
    }
    let means = blob_means(p);
    let mut r = rng::rng(seed);
    let mut data = Vec::with_capacity(p.n * p.dim);
    let mut labels = Vec::with_capacity(p.n);
    for i in 0..p.n {
        let c = i % p.k;
        for m in &means[c] {
            let z: f64 = StandardNormal.sample(&mut r);
            data.push(m + z);
        }
        labels.push(c);
    }
    Dataset::new(Matrix::new(p.n, p.dim, data)?, labels, p.k)
}
