//! Dense matrix kernels and the deterministic random source.

pub(crate) mod matrix;
mod rng;

pub use matrix::Matrix;
pub use rng::RandSource;
