use crate::error::{Error, Result};
use crate::layers::{
    global_average_pool, global_average_pool_backward, softmax_cross_entropy, Activation, DenseCache, DenseLayer,
    Dropout, LayerNormCache, LayerNormLayer, MhaCache, MhaLayer, Mode, Parameters,
};
use crate::models::{check_dims, check_input, check_onehot, Classifier, LayerRow, TensorInfo, DROPOUT_RATE};
use crate::numcore::{Matrix, RandSource};

pub const TSLT_SEQ_LEN: usize = 16;
pub const TSLT_MODEL_DIM: usize = 8;
pub const TSLT_BOTTLENECK: usize = TSLT_SEQ_LEN * TSLT_MODEL_DIM;
pub const TSLT_HEADS: usize = 2;
pub const TSLT_KEY_DIM: usize = 4;
const TSLT_HIDDEN: usize = 64;

/// Dense(128, relu) → reshape (16, 8) → LayerNorm → 2-head self-attention →
/// global average pooling → Dense(64, relu) → dropout(0.3) → Dense(K) →
/// softmax. No residual paths, no positional encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct TsltNet {
    pub dense1: DenseLayer,
    pub layernorm: LayerNormLayer,
    pub mha: MhaLayer,
    pub dense2: DenseLayer,
    pub output: DenseLayer,
    pub dropout: Dropout,
}

#[derive(Debug, Clone)]
pub struct TsltCache {
    mode: Mode,
    samples: usize,
    dense1: DenseCache,
    reshaped: (usize, usize),
    layernorm: LayerNormCache,
    attended: Matrix,
    mha: MhaCache,
    pooled: Matrix,
    dense2: DenseCache,
    dropout_mask: Option<Matrix>,
    output: DenseCache,
    logits: Matrix,
}

impl TsltCache {
    /// Which ReLU units fired, in graph order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        [&self.dense1, &self.dense2]
            .iter()
            .flat_map(|c| c.output().as_slice().iter().map(|&v| v > 0.0))
            .collect()
    }

    pub fn mha(&self) -> &MhaCache {
        &self.mha
    }

    /// Per-sample shapes of each stage as actually computed, in graph order.
    pub fn stage_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let n = self.samples.max(1);
        let per_sample = |m: &Matrix| vec![m.rows() / n, m.cols()];
        let h6 = self.dense2.output();
        vec![
            ("Dense_1", vec![self.dense1.output().cols()]),
            ("Reshape", vec![self.reshaped.0 / n, self.reshaped.1]),
            ("LayerNormalization", per_sample(self.mha.input())),
            ("MultiHeadAttention", per_sample(&self.attended)),
            ("GlobalAveragePooling1D", vec![self.pooled.cols()]),
            ("Dense_2", vec![h6.cols()]),
            ("Dropout", vec![self.dropout_mask.as_ref().unwrap_or(h6).cols()]),
            ("Output", vec![self.logits.cols()]),
        ]
    }
}

pub fn build_tslt(input_dim: usize, num_classes: usize, seed: u64) -> Result<TsltNet> {
    check_dims(input_dim, num_classes)?;
    let mut rng = RandSource::new(seed);
    Ok(TsltNet {
        dense1: DenseLayer::glorot(input_dim, TSLT_BOTTLENECK, Activation::Relu, &mut rng),
        layernorm: LayerNormLayer::new(TSLT_MODEL_DIM),
        mha: MhaLayer::glorot(TSLT_HEADS, TSLT_KEY_DIM, TSLT_MODEL_DIM, TSLT_SEQ_LEN, &mut rng),
        dense2: DenseLayer::glorot(TSLT_MODEL_DIM, TSLT_HIDDEN, Activation::Relu, &mut rng),
        output: DenseLayer::glorot(TSLT_HIDDEN, num_classes, Activation::Identity, &mut rng),
        dropout: Dropout::new(DROPOUT_RATE)?,
    })
}

impl TsltNet {
    pub fn forward_logits(&self, x: &Matrix, mode: Mode, rng: &mut RandSource) -> Result<TsltCache> {
        check_input("tslt_forward", x, self.input_dim())?;
        let samples = x.rows();
        let (h1, dense1) = self.dense1.forward(x)?;
        let h2 = h1.reshape(samples * TSLT_SEQ_LEN, TSLT_MODEL_DIM)?;
        let reshaped = h2.shape();
        let (h3, layernorm) = self.layernorm.forward(&h2)?;
        let (h4, mha) = self.mha.forward(&h3)?;
        let h5 = global_average_pool(&h4, TSLT_SEQ_LEN)?;
        let (h6, dense2) = self.dense2.forward(&h5)?;
        let (h7, dropout_mask) = self.dropout.apply(&h6, mode, rng);
        let (logits, output) = self.output.forward(&h7)?;
        Ok(TsltCache {
            mode,
            samples,
            dense1,
            reshaped,
            layernorm,
            attended: h4,
            mha,
            pooled: h5,
            dense2,
            dropout_mask,
            output,
            logits,
        })
    }
}

impl Parameters for TsltNet {
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.dense1.tensors_mut();
        out.extend(self.layernorm.tensors_mut());
        out.extend(self.mha.tensors_mut());
        out.extend(self.dense2.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }
}

const fn param(layer: &'static str, layer_id: u8, name: &'static str) -> TensorInfo {
    TensorInfo {
        layer,
        layer_id,
        name,
        trainable: true,
    }
}

const TSLT_TENSORS: [TensorInfo; 16] = [
    param("Dense_1", 1, "weights"),
    param("Dense_1", 1, "bias"),
    param("LayerNormalization", 3, "gamma"),
    param("LayerNormalization", 3, "beta"),
    param("MultiHeadAttention", 4, "query_weights"),
    param("MultiHeadAttention", 4, "query_bias"),
    param("MultiHeadAttention", 4, "key_weights"),
    param("MultiHeadAttention", 4, "key_bias"),
    param("MultiHeadAttention", 4, "value_weights"),
    param("MultiHeadAttention", 4, "value_bias"),
    param("MultiHeadAttention", 4, "output_weights"),
    param("MultiHeadAttention", 4, "output_bias"),
    param("Dense_2", 6, "weights"),
    param("Dense_2", 6, "bias"),
    param("Output", 8, "weights"),
    param("Output", 8, "bias"),
];

impl Classifier for TsltNet {
    type Cache = TsltCache;

    fn input_dim(&self) -> usize {
        self.dense1.in_dim()
    }

    fn num_classes(&self) -> usize {
        self.output.out_dim()
    }

    fn forward(&self, x: &Matrix, mode: Mode, rng: &mut RandSource) -> Result<(Matrix, TsltCache)> {
        let cache = self.forward_logits(x, mode, rng)?;
        Ok((cache.logits.rowwise_softmax(), cache))
    }

    fn backward(&self, cache: &TsltCache, onehot: &Matrix) -> Result<Vec<Matrix>> {
        if cache.mode != Mode::Train {
            return Err(Error::StaleCache(
                "tslt_backward needs a train-mode forward pass".into(),
            ));
        }
        check_onehot("tslt_backward", &cache.logits, onehot)?;
        let (_, d_logits) = softmax_cross_entropy(&cache.logits, onehot)?;
        let g_out = self.output.backward(&cache.output, &d_logits)?;
        let d_h6 = match &cache.dropout_mask {
            Some(mask) => Dropout::backward(mask, &g_out.input)?,
            None => g_out.input,
        };
        let g2 = self.dense2.backward(&cache.dense2, &d_h6)?;
        let d_h4 = global_average_pool_backward(&g2.input, TSLT_SEQ_LEN);
        let g_mha = self.mha.backward(&cache.mha, &d_h4)?;
        let g_ln = self.layernorm.backward(&cache.layernorm, &g_mha.input)?;
        let d_h1 = g_ln.input.reshape(cache.samples, TSLT_BOTTLENECK)?;
        let g1 = self.dense1.backward(&cache.dense1, &d_h1)?;

        let mut grads = vec![g1.weights, g1.bias, g_ln.gamma, g_ln.beta];
        grads.extend(g_mha.into_params());
        grads.extend([g2.weights, g2.bias, g_out.weights, g_out.bias]);
        Ok(grads)
    }

    fn state(&self) -> Vec<(TensorInfo, &Matrix)> {
        let m = &self.mha;
        let tensors: [&Matrix; 16] = [
            &self.dense1.weights,
            &self.dense1.bias,
            &self.layernorm.gamma,
            &self.layernorm.beta,
            &m.query_weights,
            &m.query_bias,
            &m.key_weights,
            &m.key_bias,
            &m.value_weights,
            &m.value_bias,
            &m.output_weights,
            &m.output_bias,
            &self.dense2.weights,
            &self.dense2.bias,
            &self.output.weights,
            &self.output.bias,
        ];
        TSLT_TENSORS.into_iter().zip(tensors).collect()
    }

    fn state_mut(&mut self) -> Vec<(TensorInfo, &mut Matrix)> {
        TSLT_TENSORS.into_iter().zip(self.tensors_mut()).collect()
    }

    fn layout(&self) -> Vec<LayerRow> {
        let k = self.num_classes();
        vec![
            LayerRow::new("Input", "Input Layer", vec![self.input_dim()], "-"),
            LayerRow::new("Dense_1", "Fully Connected (128)", vec![TSLT_BOTTLENECK], "ReLU")
                .with_formula("input_dim × 128 + 128"),
            LayerRow::new("Reshape", "Reshape", vec![TSLT_SEQ_LEN, TSLT_MODEL_DIM], "-"),
            LayerRow::new(
                "LayerNormalization",
                "Normalization",
                vec![TSLT_SEQ_LEN, TSLT_MODEL_DIM],
                "-",
            )
            .with_reference(32),
            LayerRow::new(
                "MultiHeadAttention",
                "Self-Attention (2 heads, key_dim=4)",
                vec![TSLT_SEQ_LEN, TSLT_MODEL_DIM],
                "-",
            )
            .with_reference(1440),
            LayerRow::new("GlobalAveragePooling1D", "Pooling", vec![TSLT_MODEL_DIM], "-"),
            LayerRow::new("Dense_2", "Fully Connected (64)", vec![TSLT_HIDDEN], "ReLU").with_reference(576),
            LayerRow::new("Dropout", "Regularization (0.3)", vec![TSLT_HIDDEN], "-"),
            LayerRow::new("Output", "Fully Connected", vec![k], "Softmax")
                .with_formula("64 × num_classes + num_classes"),
        ]
    }
}
