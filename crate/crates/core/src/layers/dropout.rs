use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::numcore::{Matrix, RandSource};

/// Inverted dropout: survivors are scaled by `1 / (1 − rate)` during
/// training, so inference is the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Returns the output and, in train mode, the multiplicative mask
    /// (entries are `0` or `1 / (1 − rate)`). Infer mode draws nothing
    /// from `rng`.
    pub fn apply(&self, x: &Matrix, mode: Mode, rng: &mut RandSource) -> (Matrix, Option<Matrix>) {
        if mode == Mode::Infer {
            return (x.clone(), None);
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mut mask = Matrix::zeros(x.rows(), x.cols());
        for m in mask.as_mut_slice() {
            *m = if rng.uniform() < self.rate { 0.0 } else { keep };
        }
        let out = x.hadamard(&mask).expect("mask has the input shape");
        (out, Some(mask))
    }

    pub fn backward(mask: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        upstream.hadamard(mask)
    }
}
