use crate::error::{Error, Result};
use crate::layers::{glorot_uniform, Parameters};
use crate::numcore::matrix::{dot, softmax_in_place};
use crate::numcore::{Matrix, RandSource};

/// Multi-head self-attention over fixed-length sequences.
///
/// Input and output are `(n · seq_len) × model_dim`. Each projection weight
/// is stored `out × in` like [`DenseLayer`](crate::layers::DenseLayer): the
/// query/key/value maps are `(heads · key_dim) × model_dim` and the output
/// map is `model_dim × (heads · key_dim)`. Head `h` owns columns
/// `h·key_dim .. (h+1)·key_dim` of the projected queries, keys and values.
#[derive(Debug, Clone, PartialEq)]
pub struct MhaLayer {
    pub heads: usize,
    pub key_dim: usize,
    pub model_dim: usize,
    pub seq_len: usize,
    pub query_weights: Matrix,
    pub query_bias: Matrix,
    pub key_weights: Matrix,
    pub key_bias: Matrix,
    pub value_weights: Matrix,
    pub value_bias: Matrix,
    pub output_weights: Matrix,
    pub output_bias: Matrix,
}

#[derive(Debug, Clone)]
pub struct MhaCache {
    input: Matrix,
    queries: Matrix,
    keys: Matrix,
    values: Matrix,
    /// Attention weights, `[sample][head][query row][key row]` flattened.
    attention: Vec<f64>,
    context: Matrix,
}

#[derive(Debug, Clone)]
pub struct MhaGrads {
    pub input: Matrix,
    pub query_weights: Matrix,
    pub query_bias: Matrix,
    pub key_weights: Matrix,
    pub key_bias: Matrix,
    pub value_weights: Matrix,
    pub value_bias: Matrix,
    pub output_weights: Matrix,
    pub output_bias: Matrix,
}

impl MhaGrads {
    /// Parameter gradients in [`Parameters::tensors_mut`] order.
    pub fn into_params(self) -> Vec<Matrix> {
        vec![
            self.query_weights,
            self.query_bias,
            self.key_weights,
            self.key_bias,
            self.value_weights,
            self.value_bias,
            self.output_weights,
            self.output_bias,
        ]
    }
}

impl MhaCache {
    pub fn input(&self) -> &Matrix {
        &self.input
    }

    /// Attention matrix (`seq_len × seq_len`) of one head for one sample.
    pub fn attention(&self, sample: usize, head: usize, heads: usize, seq_len: usize) -> Matrix {
        let block = seq_len * seq_len;
        let start = (sample * heads + head) * block;
        Matrix::from_vec(seq_len, seq_len, self.attention[start..start + block].to_vec())
            .expect("block has seq_len² entries")
    }
}

impl MhaLayer {
    pub fn zeros(heads: usize, key_dim: usize, model_dim: usize, seq_len: usize) -> Self {
        let inner = heads * key_dim;
        Self {
            heads,
            key_dim,
            model_dim,
            seq_len,
            query_weights: Matrix::zeros(inner, model_dim),
            query_bias: Matrix::zeros(1, inner),
            key_weights: Matrix::zeros(inner, model_dim),
            key_bias: Matrix::zeros(1, inner),
            value_weights: Matrix::zeros(inner, model_dim),
            value_bias: Matrix::zeros(1, inner),
            output_weights: Matrix::zeros(model_dim, inner),
            output_bias: Matrix::zeros(1, model_dim),
        }
    }

    pub fn glorot(heads: usize, key_dim: usize, model_dim: usize, seq_len: usize, rng: &mut RandSource) -> Self {
        let inner = heads * key_dim;
        let mut layer = Self::zeros(heads, key_dim, model_dim, seq_len);
        layer.query_weights = glorot_uniform(inner, model_dim, rng);
        layer.key_weights = glorot_uniform(inner, model_dim, rng);
        layer.value_weights = glorot_uniform(inner, model_dim, rng);
        layer.output_weights = glorot_uniform(model_dim, inner, rng);
        layer
    }

    pub fn param_count(&self) -> usize {
        [
            &self.query_weights,
            &self.query_bias,
            &self.key_weights,
            &self.key_bias,
            &self.value_weights,
            &self.value_bias,
            &self.output_weights,
            &self.output_bias,
        ]
        .iter()
        .map(|m| m.len())
        .sum()
    }

    fn project(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
        let mut y = x.matmul_nt(w)?;
        y.add_row_broadcast(b)?;
        Ok(y)
    }

    fn check_input(&self, x: &Matrix) -> Result<usize> {
        if x.cols() != self.model_dim || self.seq_len == 0 || x.rows() % self.seq_len != 0 {
            return Err(Error::Shape {
                op: "mha_forward",
                left: x.shape(),
                right: (self.seq_len, self.model_dim),
            });
        }
        Ok(x.rows() / self.seq_len)
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, MhaCache)> {
        let samples = self.check_input(x)?;
        let (seq, dk, heads) = (self.seq_len, self.key_dim, self.heads);
        let inner = heads * dk;
        let scale = 1.0 / (dk as f64).sqrt();

        let queries = Self::project(x, &self.query_weights, &self.query_bias)?;
        let keys = Self::project(x, &self.key_weights, &self.key_bias)?;
        let values = Self::project(x, &self.value_weights, &self.value_bias)?;

        let mut attention = vec![0.0; samples * heads * seq * seq];
        let mut context = Matrix::zeros(x.rows(), inner);
        for s in 0..samples {
            let base = s * seq;
            for h in 0..heads {
                let cols = h * dk..(h + 1) * dk;
                let block = &mut attention[(s * heads + h) * seq * seq..(s * heads + h + 1) * seq * seq];
                for i in 0..seq {
                    let q = &queries.row(base + i)[cols.clone()];
                    let scores = &mut block[i * seq..(i + 1) * seq];
                    for (j, score) in scores.iter_mut().enumerate() {
                        *score = dot(q, &keys.row(base + j)[cols.clone()]) * scale;
                    }
                    softmax_in_place(scores);
                    let out = &mut context.row_mut(base + i)[cols.clone()];
                    for (j, &a) in scores.iter().enumerate() {
                        let v = &values.row(base + j)[cols.clone()];
                        for (o, vv) in out.iter_mut().zip(v) {
                            *o += a * vv;
                        }
                    }
                }
            }
        }

        let output = Self::project(&context, &self.output_weights, &self.output_bias)?;
        let cache = MhaCache {
            input: x.clone(),
            queries,
            keys,
            values,
            attention,
            context,
        };
        Ok((output, cache))
    }

    pub fn backward(&self, cache: &MhaCache, upstream: &Matrix) -> Result<MhaGrads> {
        if upstream.shape() != (cache.input.rows(), self.model_dim) {
            return Err(Error::Shape {
                op: "mha_backward",
                left: upstream.shape(),
                right: cache.input.shape(),
            });
        }
        let (seq, dk, heads) = (self.seq_len, self.key_dim, self.heads);
        let samples = cache.input.rows() / seq;
        let inner = heads * dk;
        let scale = 1.0 / (dk as f64).sqrt();

        let output_weights = upstream.matmul_tn(&cache.context)?;
        let output_bias = upstream.column_sums();
        let d_context = upstream.matmul(&self.output_weights)?;

        let rows = cache.input.rows();
        let mut d_queries = Matrix::zeros(rows, inner);
        let mut d_keys = Matrix::zeros(rows, inner);
        let mut d_values = Matrix::zeros(rows, inner);
        let mut d_scores = vec![0.0; seq];
        for s in 0..samples {
            let base = s * seq;
            for h in 0..heads {
                let cols = h * dk..(h + 1) * dk;
                let block = &cache.attention[(s * heads + h) * seq * seq..(s * heads + h + 1) * seq * seq];
                for i in 0..seq {
                    let a_row = &block[i * seq..(i + 1) * seq];
                    let dc = &d_context.row(base + i)[cols.clone()];
                    // dA_ij = dC_i · V_j ; softmax backward: dS = A ⊙ (dA − Σ_j A_ij dA_ij)
                    let mut weighted = 0.0;
                    for j in 0..seq {
                        let da = dot(dc, &cache.values.row(base + j)[cols.clone()]);
                        d_scores[j] = da;
                        weighted += a_row[j] * da;
                    }
                    for j in 0..seq {
                        d_scores[j] = a_row[j] * (d_scores[j] - weighted) * scale;
                    }
                    // dV_j += A_ij dC_i
                    for j in 0..seq {
                        let a = a_row[j];
                        let dv = &mut d_values.row_mut(base + j)[cols.clone()];
                        for (d, c) in dv.iter_mut().zip(dc) {
                            *d += a * c;
                        }
                    }
                    // dQ_i = Σ_j dS_ij K_j ; dK_j += dS_ij Q_i
                    for j in 0..seq {
                        let ds = d_scores[j];
                        let k = &cache.keys.row(base + j)[cols.clone()];
                        let dq = &mut d_queries.row_mut(base + i)[cols.clone()];
                        for (d, kv) in dq.iter_mut().zip(k) {
                            *d += ds * kv;
                        }
                        let q = &cache.queries.row(base + i)[cols.clone()];
                        let dkey = &mut d_keys.row_mut(base + j)[cols.clone()];
                        for (d, qv) in dkey.iter_mut().zip(q) {
                            *d += ds * qv;
                        }
                    }
                }
            }
        }

        let mut input = d_queries.matmul(&self.query_weights)?;
        input.add_assign(&d_keys.matmul(&self.key_weights)?)?;
        input.add_assign(&d_values.matmul(&self.value_weights)?)?;

        Ok(MhaGrads {
            input,
            query_weights: d_queries.matmul_tn(&cache.input)?,
            query_bias: d_queries.column_sums(),
            key_weights: d_keys.matmul_tn(&cache.input)?,
            key_bias: d_keys.column_sums(),
            value_weights: d_values.matmul_tn(&cache.input)?,
            value_bias: d_values.column_sums(),
            output_weights,
            output_bias,
        })
    }
}

impl Parameters for MhaLayer {
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        vec![
            &mut self.query_weights,
            &mut self.query_bias,
            &mut self.key_weights,
            &mut self.key_bias,
            &mut self.value_weights,
            &mut self.value_bias,
            &mut self.output_weights,
            &mut self.output_bias,
        ]
    }
}
