//! Differentiable layer kernels with hand-written backward passes.
//!
//! Sequence inputs are carried as `(n · seq_len) × features` matrices: the
//! rows of one sample are contiguous, so a row-major `(n, 128)` activation
//! reshaped to `(16n, 8)` is already in the layout these kernels expect.

mod attention;
mod batchnorm;
mod dense;
mod dropout;
mod gradcheck;
mod layernorm;
mod loss;
mod pooling;

pub use attention::{MhaCache, MhaGrads, MhaLayer};
pub use batchnorm::{BatchNormCache, BatchNormGrads, BatchNormLayer};
pub use dense::{Activation, DenseCache, DenseGrads, DenseLayer};
pub use dropout::Dropout;
pub use gradcheck::{finite_difference_check, relative_error, GradCheckReport, Parameters};
pub use layernorm::{LayerNormCache, LayerNormGrads, LayerNormLayer};
pub use loss::{cross_entropy, one_hot, softmax_cross_entropy};
pub use pooling::{global_average_pool, global_average_pool_backward};

use crate::numcore::{Matrix, RandSource};

/// Whether a forward pass is part of training (dropout active, batch
/// statistics used) or inference (deterministic).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Uniform Glorot initialization for an `out × in` weight matrix.
pub fn glorot_uniform(fan_out: usize, fan_in: usize, rng: &mut RandSource) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Matrix::from_fn(fan_out, fan_in, |_, _| rng.uniform_range(-limit, limit))
}
