use crate::error::{Error, Result};
use crate::layers::{glorot_uniform, Parameters};
use crate::numcore::{Matrix, RandSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Fully connected layer `y = act(x Wᵀ + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Matrix,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Matrix,
    output: Matrix,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Matrix,
    pub weights: Matrix,
    pub bias: Matrix,
}

impl DenseCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Matrix, activation: Activation) -> Result<Self> {
        if bias.rows() != 1 || bias.cols() != weights.rows() {
            return Err(Error::Shape {
                op: "dense bias",
                left: weights.shape(),
                right: bias.shape(),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: Matrix::zeros(1, out_dim),
            activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut RandSource) -> Self {
        Self {
            weights: glorot_uniform(out_dim, in_dim, rng),
            bias: Matrix::zeros(1, out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "dense_forward",
                left: x.shape(),
                right: self.weights.shape(),
            });
        }
        let mut y = x.matmul_nt(&self.weights)?;
        y.add_row_broadcast(&self.bias)?;
        if self.activation == Activation::Relu {
            y.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(y)
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, DenseCache)> {
        let y = self.infer(x)?;
        let cache = DenseCache {
            input: x.clone(),
            output: y.clone(),
        };
        Ok((y, cache))
    }

    pub fn backward(&self, cache: &DenseCache, upstream: &Matrix) -> Result<DenseGrads> {
        if upstream.shape() != cache.output.shape() {
            return Err(Error::Shape {
                op: "dense_backward",
                left: upstream.shape(),
                right: cache.output.shape(),
            });
        }
        let dz = match self.activation {
            Activation::Identity => upstream.clone(),
            // derivative at exactly zero is taken as zero
            Activation::Relu => {
                let mut dz = upstream.clone();
                for (g, &y) in dz.as_mut_slice().iter_mut().zip(cache.output.as_slice()) {
                    if y <= 0.0 {
                        *g = 0.0;
                    }
                }
                dz
            }
        };
        Ok(DenseGrads {
            input: dz.matmul(&self.weights)?,
            weights: dz.matmul_tn(&cache.input)?,
            bias: dz.column_sums(),
        })
    }
}

impl Parameters for DenseLayer {
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![&mut self.weights, &mut self.bias]
    }
}
