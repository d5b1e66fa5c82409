use crate::error::{Error, Result};
use crate::layers::{Mode, Parameters};
use crate::numcore::Matrix;

pub const BATCHNORM_MOMENTUM: f64 = 0.99;
pub const BATCHNORM_EPSILON: f64 = 1e-3;

/// Per-feature batch normalization over the rows of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub running_mean: Matrix,
    pub running_var: Matrix,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    mode: Mode,
    normalized: Matrix,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads {
    pub input: Matrix,
    pub gamma: Matrix,
    pub beta: Matrix,
}

impl BatchNormLayer {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Matrix::filled(1, features, 1.0),
            beta: Matrix::zeros(1, features),
            running_mean: Matrix::zeros(1, features),
            running_var: Matrix::filled(1, features, 1.0),
            momentum: BATCHNORM_MOMENTUM,
            epsilon: BATCHNORM_EPSILON,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.cols()
    }

    /// Trainable values only; the running statistics are buffers.
    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    /// Normalizes with batch statistics (train) or running statistics
    /// (infer). Running statistics are folded in separately by
    /// [`BatchNormLayer::update_running`] so that the forward pass itself
    /// stays read-only.
    pub fn forward(&self, x: &Matrix, mode: Mode) -> Result<(Matrix, BatchNormCache)> {
        let f = self.features();
        if x.cols() != f {
            return Err(Error::Shape {
                op: "batchnorm_forward",
                left: x.shape(),
                right: self.gamma.shape(),
            });
        }
        let n = x.rows();
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(Error::InvalidArgument(format!(
                        "batch normalization in train mode needs at least 2 rows, got {n}"
                    )));
                }
                let mean: Vec<f64> = x.mean_over_rows()?.into_vec();
                let mut var = vec![0.0; f];
                for row in x.iter_rows() {
                    for j in 0..f {
                        let d = row[j] - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                (mean, var)
            }
            Mode::Infer => (
                self.running_mean.as_slice().to_vec(),
                self.running_var.as_slice().to_vec(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut normalized = x.clone();
        let mut out = Matrix::zeros(n, f);
        let (gamma, beta) = (self.gamma.as_slice(), self.beta.as_slice());
        for r in 0..n {
            let xr = normalized.row_mut(r);
            for j in 0..f {
                xr[j] = (xr[j] - mean[j]) * inv_std[j];
            }
            let xr = normalized.row(r).to_vec();
            for (j, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = gamma[j] * xr[j] + beta[j];
            }
        }
        Ok((
            out,
            BatchNormCache {
                mode,
                normalized,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        ))
    }

    /// Exponential moving average update from a train-mode cache.
    pub fn update_running(&mut self, cache: &BatchNormCache) {
        if cache.mode != Mode::Train {
            return;
        }
        let m = self.momentum;
        for (r, b) in self.running_mean.as_mut_slice().iter_mut().zip(&cache.batch_mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.running_var.as_mut_slice().iter_mut().zip(&cache.batch_var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }

    pub fn backward(&self, cache: &BatchNormCache, upstream: &Matrix) -> Result<BatchNormGrads> {
        if cache.mode != Mode::Train {
            return Err(Error::StaleCache("batchnorm cache came from an infer-mode pass".into()));
        }
        if upstream.shape() != cache.normalized.shape() {
            return Err(Error::Shape {
                op: "batchnorm_backward",
                left: upstream.shape(),
                right: cache.normalized.shape(),
            });
        }
        let (n, f) = upstream.shape();
        let gamma = self.gamma.as_slice();
        let beta_grad = upstream.column_sums();
        let mut gamma_grad = Matrix::zeros(1, f);
        let mut sum_dxhat = vec![0.0; f];
        let mut sum_dxhat_xhat = vec![0.0; f];
        for r in 0..n {
            let dy = upstream.row(r);
            let xhat = cache.normalized.row(r);
            for j in 0..f {
                gamma_grad.as_mut_slice()[j] += dy[j] * xhat[j];
                let dxhat = dy[j] * gamma[j];
                sum_dxhat[j] += dxhat;
                sum_dxhat_xhat[j] += dxhat * xhat[j];
            }
        }
        let mut input = Matrix::zeros(n, f);
        let nf = n as f64;
        for r in 0..n {
            let dy = upstream.row(r);
            let xhat = cache.normalized.row(r).to_vec();
            for (j, d) in input.row_mut(r).iter_mut().enumerate() {
                let dxhat = dy[j] * gamma[j];
                *d = cache.inv_std[j] / nf * (nf * dxhat - sum_dxhat[j] - xhat[j] * sum_dxhat_xhat[j]);
            }
        }
        Ok(BatchNormGrads {
            input,
            gamma: gamma_grad,
            beta: beta_grad,
        })
    }
}

impl Parameters for BatchNormLayer {
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.gamma, &mut self.beta]
    }
}
