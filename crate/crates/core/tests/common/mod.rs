#![allow(dead_code)]

use plboost::RawDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Smooth regression target with a few interactions, so linear leaves have something to fit.
pub fn synthetic_regression(n: usize, m: usize, noise: f64, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let labels = (0..n)
        .map(|i| {
            let x = |j: usize| features[j % m][i];
            let mut y = 4.0 * x(0) - 3.0 * x(1) + 6.0 * x(2) * x(3) + 3.0 * (5.0 * x(4)).sin();
            y += 2.0 * (x(5) - 0.5).abs() + x(6) * x(6) * 3.0;
            for j in 7..m {
                y += 0.2 * x(j);
            }
            let e: f64 = rng.sample(StandardNormal);
            y + noise * e
        })
        .collect();
    RawDataset::new(features, labels).unwrap()
}

/// Additive target where every feature carries signal, so deep paths use many distinct features.
pub fn synthetic_wide(n: usize, m: usize, noise: f64, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weight: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
    let phase: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..6.0)).collect();
    let features: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let labels = (0..n)
        .map(|i| {
            let y: f64 = (0..m).map(|j| weight[j] * (4.0 * features[j][i] + phase[j]).sin()).sum();
            let e: f64 = rng.sample(StandardNormal);
            y + noise * e
        })
        .collect();
    RawDataset::new(features, labels).unwrap()
}

/// Binary labels from a thresholded linear score plus noise.
pub fn synthetic_binary(n: usize, m: usize, seed: u64) -> RawDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let labels = (0..n)
        .map(|i| {
            let score: f64 = (0..m).map(|j| features[j][i] * (j as f64 + 1.0)).sum();
            let e: f64 = rng.sample(StandardNormal);
            f64::from(score + e > 0.0)
        })
        .collect();
    RawDataset::new(features, labels).unwrap()
}

pub fn write_csv(path: &std::path::Path, data: &RawDataset, header: bool) {
    let mut text = String::new();
    if header {
        let names: Vec<String> =
            std::iter::once("y".to_string()).chain((0..data.n_features()).map(|j| format!("x{j}"))).collect();
        text.push_str(&names.join(","));
        text.push('\n');
    }
    for i in 0..data.n_rows() {
        let cells: Vec<String> = std::iter::once(data.labels[i]).chain(data.row(i)).map(|v| format!("{v:?}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}
