use crate::error::{Error, Result};
use crate::layers::Parameters;
use crate::numcore::Matrix;

/// Normalizes each row over its feature axis, then applies per-feature
/// `gamma` and `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormLayer {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LayerNormGrads {
    pub input: Matrix,
    pub gamma: Matrix,
    pub beta: Matrix,
}

pub const LAYERNORM_EPSILON: f64 = 1e-3;

impl LayerNormLayer {
    pub fn new(features: usize) -> Self {
        Self {
            gamma: Matrix::filled(1, features, 1.0),
            beta: Matrix::zeros(1, features),
            epsilon: LAYERNORM_EPSILON,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.cols()
    }

    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LayerNormCache)> {
        let f = self.features();
        if x.cols() != f {
            return Err(Error::Shape {
                op: "layernorm_forward",
                left: x.shape(),
                right: self.gamma.shape(),
            });
        }
        let mut normalized = x.clone();
        let mut out = Matrix::zeros(x.rows(), f);
        let mut inv_std = Vec::with_capacity(x.rows());
        let gamma = self.gamma.as_slice();
        let beta = self.beta.as_slice();
        for r in 0..x.rows() {
            let row = normalized.row_mut(r);
            let mean = row.iter().sum::<f64>() / f as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / f as f64;
            let inv = 1.0 / (var + self.epsilon).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
            inv_std.push(inv);
            let o = out.row_mut(r);
            for j in 0..f {
                o[j] = gamma[j] * normalized.get(r, j) + beta[j];
            }
        }
        Ok((out, LayerNormCache { normalized, inv_std }))
    }

    pub fn backward(&self, cache: &LayerNormCache, upstream: &Matrix) -> Result<LayerNormGrads> {
        if upstream.shape() != cache.normalized.shape() {
            return Err(Error::Shape {
                op: "layernorm_backward",
                left: upstream.shape(),
                right: cache.normalized.shape(),
            });
        }
        let f = self.features();
        let gamma = self.gamma.as_slice();
        let mut d_gamma = Matrix::zeros(1, f);
        let d_beta = upstream.column_sums();
        let mut d_input = Matrix::zeros(upstream.rows(), f);
        let mut dxhat = vec![0.0; f];
        for r in 0..upstream.rows() {
            let dy = upstream.row(r);
            let xhat = cache.normalized.row(r);
            let mut sum_dxhat = 0.0;
            let mut sum_dxhat_xhat = 0.0;
            for j in 0..f {
                d_gamma.as_mut_slice()[j] += dy[j] * xhat[j];
                dxhat[j] = dy[j] * gamma[j];
                sum_dxhat += dxhat[j];
                sum_dxhat_xhat += dxhat[j] * xhat[j];
            }
            let scale = cache.inv_std[r] / f as f64;
            let dx = d_input.row_mut(r);
            for j in 0..f {
                dx[j] = scale * (f as f64 * dxhat[j] - sum_dxhat - xhat[j] * sum_dxhat_xhat);
            }
        }
        Ok(LayerNormGrads {
            input: d_input,
            gamma: d_gamma,
            beta: d_beta,
        })
    }
}

impl Parameters for LayerNormLayer {
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.gamma, &mut self.beta]
    }
}
