//! Shared fixtures for the criterion benchmarks.

use ptune_core::model::{Model, ModelConfig};
use ptune_core::rng::{below, rng, uniform};
use ptune_core::Tensor;

/// Vocabulary size of a toy corpus of a few hundred pairs.
pub const VOCAB: usize = 160;

pub fn toy_model(seed: u64) -> Model {
    Model::init(&ModelConfig {
        vocab_size: VOCAB,
        seed,
        ..ModelConfig::default()
    })
    .expect("default toy config is valid")
}

pub fn token_ids(len: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    (0..len).map(|_| 5 + below(&mut r, VOCAB - 5)).collect()
}

pub fn matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut r = rng(seed);
    let data = (0..rows * cols)
        .map(|_| uniform(&mut r, -1.0, 1.0))
        .collect();
    Tensor::matrix(rows, cols, data).expect("rows * cols values")
}

pub fn values(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| uniform(&mut r, -1.0, 1.0)).collect()
}
