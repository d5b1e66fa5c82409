//! Shared fixtures for the benchmarks.

use tslt_core::{Matrix, RandSource};

/// A `rows × cols` matrix of standard normal draws.
pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = RandSource::new(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

/// Random features and labels for a batch of `n` flows.
pub fn batch(n: usize, input_dim: usize, num_classes: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let x = normal_matrix(n, input_dim, seed);
    let mut rng = RandSource::with_stream(seed, 1);
    let y = (0..n).map(|_| rng.below(num_classes)).collect();
    (x, y)
}
