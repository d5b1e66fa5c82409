use crate::error::{Error, Result};
use crate::layers::{
    softmax_cross_entropy, Activation, BatchNormCache, BatchNormLayer, DenseCache, DenseLayer, Dropout, Mode,
    Parameters,
};
use crate::models::{check_dims, check_input, check_onehot, Classifier, LayerRow, TensorInfo, DROPOUT_RATE};
use crate::numcore::{Matrix, RandSource};

pub const MLP_HIDDEN: [usize; 3] = [512, 256, 128];

/// Three blocks of `Dropout(BatchNorm(ReLU(W x + b)))` (the third without
/// batch normalization) followed by a softmax output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    pub dense1: DenseLayer,
    pub norm1: BatchNormLayer,
    pub dense2: DenseLayer,
    pub norm2: BatchNormLayer,
    pub dense3: DenseLayer,
    pub output: DenseLayer,
    pub dropout: Dropout,
}

#[derive(Debug, Clone)]
pub struct MlpCache {
    mode: Mode,
    dense1: DenseCache,
    norm1: BatchNormCache,
    mask1: Option<Matrix>,
    dense2: DenseCache,
    norm2: BatchNormCache,
    mask2: Option<Matrix>,
    dense3: DenseCache,
    mask3: Option<Matrix>,
    output: DenseCache,
    logits: Matrix,
}

impl MlpCache {
    /// Which ReLU units fired, in graph order. Central differences are only
    /// valid when a perturbation leaves this pattern unchanged.
    pub fn relu_pattern(&self) -> Vec<bool> {
        [&self.dense1, &self.dense2, &self.dense3]
            .iter()
            .flat_map(|c| c.output().as_slice().iter().map(|&v| v > 0.0))
            .collect()
    }
}

pub fn build_mlp(input_dim: usize, num_classes: usize, seed: u64) -> Result<MlpNet> {
    check_dims(input_dim, num_classes)?;
    let mut rng = RandSource::new(seed);
    let [h1, h2, h3] = MLP_HIDDEN;
    Ok(MlpNet {
        dense1: DenseLayer::glorot(input_dim, h1, Activation::Relu, &mut rng),
        norm1: BatchNormLayer::new(h1),
        dense2: DenseLayer::glorot(h1, h2, Activation::Relu, &mut rng),
        norm2: BatchNormLayer::new(h2),
        dense3: DenseLayer::glorot(h2, h3, Activation::Relu, &mut rng),
        output: DenseLayer::glorot(h3, num_classes, Activation::Identity, &mut rng),
        dropout: Dropout::new(DROPOUT_RATE)?,
    })
}

fn mask_backward(mask: &Option<Matrix>, upstream: Matrix) -> Result<Matrix> {
    match mask {
        Some(m) => Dropout::backward(m, &upstream),
        None => Ok(upstream),
    }
}

impl Parameters for MlpNet {
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = self.dense1.tensors_mut();
        out.extend(self.norm1.tensors_mut());
        out.extend(self.dense2.tensors_mut());
        out.extend(self.norm2.tensors_mut());
        out.extend(self.dense3.tensors_mut());
        out.extend(self.output.tensors_mut());
        out
    }
}

const fn info(layer: &'static str, layer_id: u8, name: &'static str, trainable: bool) -> TensorInfo {
    TensorInfo {
        layer,
        layer_id,
        name,
        trainable,
    }
}

const MLP_TENSORS: [TensorInfo; 16] = [
    info("Dense_1", 1, "weights", true),
    info("Dense_1", 1, "bias", true),
    info("BatchNorm_1", 2, "gamma", true),
    info("BatchNorm_1", 2, "beta", true),
    info("Dense_2", 4, "weights", true),
    info("Dense_2", 4, "bias", true),
    info("BatchNorm_2", 5, "gamma", true),
    info("BatchNorm_2", 5, "beta", true),
    info("Dense_3", 7, "weights", true),
    info("Dense_3", 7, "bias", true),
    info("Output", 9, "weights", true),
    info("Output", 9, "bias", true),
    info("BatchNorm_1", 2, "running_mean", false),
    info("BatchNorm_1", 2, "running_var", false),
    info("BatchNorm_2", 5, "running_mean", false),
    info("BatchNorm_2", 5, "running_var", false),
];

impl Classifier for MlpNet {
    type Cache = MlpCache;

    fn input_dim(&self) -> usize {
        self.dense1.in_dim()
    }

    fn num_classes(&self) -> usize {
        self.output.out_dim()
    }

    fn forward(&self, x: &Matrix, mode: Mode, rng: &mut RandSource) -> Result<(Matrix, MlpCache)> {
        check_input("mlp_forward", x, self.input_dim())?;
        let (a1, dense1) = self.dense1.forward(x)?;
        let (b1, norm1) = self.norm1.forward(&a1, mode)?;
        let (h1, mask1) = self.dropout.apply(&b1, mode, rng);
        let (a2, dense2) = self.dense2.forward(&h1)?;
        let (b2, norm2) = self.norm2.forward(&a2, mode)?;
        let (h2, mask2) = self.dropout.apply(&b2, mode, rng);
        let (a3, dense3) = self.dense3.forward(&h2)?;
        let (h3, mask3) = self.dropout.apply(&a3, mode, rng);
        let (logits, output) = self.output.forward(&h3)?;
        let probs = logits.rowwise_softmax();
        Ok((
            probs,
            MlpCache {
                mode,
                dense1,
                norm1,
                mask1,
                dense2,
                norm2,
                mask2,
                dense3,
                mask3,
                output,
                logits,
            },
        ))
    }

    fn backward(&self, cache: &MlpCache, onehot: &Matrix) -> Result<Vec<Matrix>> {
        if cache.mode != Mode::Train {
            return Err(Error::StaleCache("mlp_backward needs a train-mode forward pass".into()));
        }
        check_onehot("mlp_backward", &cache.logits, onehot)?;
        let (_, d_logits) = softmax_cross_entropy(&cache.logits, onehot)?;
        let g_out = self.output.backward(&cache.output, &d_logits)?;
        let g3 = self
            .dense3
            .backward(&cache.dense3, &mask_backward(&cache.mask3, g_out.input)?)?;
        let d_b2 = mask_backward(&cache.mask2, g3.input)?;
        let gn2 = self.norm2.backward(&cache.norm2, &d_b2)?;
        let g2 = self.dense2.backward(&cache.dense2, &gn2.input)?;
        let d_b1 = mask_backward(&cache.mask1, g2.input)?;
        let gn1 = self.norm1.backward(&cache.norm1, &d_b1)?;
        let g1 = self.dense1.backward(&cache.dense1, &gn1.input)?;
        Ok(vec![
            g1.weights,
            g1.bias,
            gn1.gamma,
            gn1.beta,
            g2.weights,
            g2.bias,
            gn2.gamma,
            gn2.beta,
            g3.weights,
            g3.bias,
            g_out.weights,
            g_out.bias,
        ])
    }

    fn commit_batch(&mut self, cache: &MlpCache) {
        self.norm1.update_running(&cache.norm1);
        self.norm2.update_running(&cache.norm2);
    }

    fn state(&self) -> Vec<(TensorInfo, &Matrix)> {
        let tensors: [&Matrix; 16] = [
            &self.dense1.weights,
            &self.dense1.bias,
            &self.norm1.gamma,
            &self.norm1.beta,
            &self.dense2.weights,
            &self.dense2.bias,
            &self.norm2.gamma,
            &self.norm2.beta,
            &self.dense3.weights,
            &self.dense3.bias,
            &self.output.weights,
            &self.output.bias,
            &self.norm1.running_mean,
            &self.norm1.running_var,
            &self.norm2.running_mean,
            &self.norm2.running_var,
        ];
        MLP_TENSORS.into_iter().zip(tensors).collect()
    }

    fn state_mut(&mut self) -> Vec<(TensorInfo, &mut Matrix)> {
        let tensors: [&mut Matrix; 16] = [
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.norm1.gamma,
            &mut self.norm1.beta,
            &mut self.dense2.weights,
            &mut self.dense2.bias,
            &mut self.norm2.gamma,
            &mut self.norm2.beta,
            &mut self.dense3.weights,
            &mut self.dense3.bias,
            &mut self.output.weights,
            &mut self.output.bias,
            &mut self.norm1.running_mean,
            &mut self.norm1.running_var,
            &mut self.norm2.running_mean,
            &mut self.norm2.running_var,
        ];
        MLP_TENSORS.into_iter().zip(tensors).collect()
    }

    fn layout(&self) -> Vec<LayerRow> {
        let [h1, h2, h3] = MLP_HIDDEN;
        vec![
            LayerRow::new("Input", "Input Layer", vec![self.input_dim()], "-"),
            LayerRow::new("Dense_1", "Fully Connected (512)", vec![h1], "ReLU"),
            LayerRow::new("BatchNorm_1", "Batch Normalization", vec![h1], "-"),
            LayerRow::new("Dropout_1", "Regularization (0.3)", vec![h1], "-"),
            LayerRow::new("Dense_2", "Fully Connected (256)", vec![h2], "ReLU"),
            LayerRow::new("BatchNorm_2", "Batch Normalization", vec![h2], "-"),
            LayerRow::new("Dropout_2", "Regularization (0.3)", vec![h2], "-"),
            LayerRow::new("Dense_3", "Fully Connected (128)", vec![h3], "ReLU"),
            LayerRow::new("Dropout_3", "Regularization (0.3)", vec![h3], "-"),
            LayerRow::new("Output", "Fully Connected", vec![self.num_classes()], "Softmax"),
        ]
    }
}
