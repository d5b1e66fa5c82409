//! The TSLT-Net graph, the MLP baseline, parameter accounting and the
//! deployable model bundle.

mod bundle;
mod mlp;
mod params;
mod tslt;

pub use bundle::{ModelBundle, FORMAT_VERSION, MAGIC};
pub use mlp::{build_mlp, MlpCache, MlpNet, MLP_HIDDEN};
pub use params::{count_params, LayerRow, ParamTable};
pub use tslt::{
    build_tslt, TsltCache, TsltNet, TSLT_BOTTLENECK, TSLT_HEADS, TSLT_KEY_DIM, TSLT_MODEL_DIM, TSLT_SEQ_LEN,
};

use crate::error::{Error, Result};
use crate::layers::{Mode, Parameters};
use crate::numcore::{Matrix, RandSource};

pub const DROPOUT_RATE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Tslt,
    Mlp,
}

impl Architecture {
    pub fn tag(self) -> u8 {
        match self {
            Architecture::Tslt => 0,
            Architecture::Mlp => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Architecture::Tslt),
            1 => Some(Architecture::Mlp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Tslt => "tslt",
            Architecture::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Multiclass,
    Binary,
}

impl Task {
    pub fn tag(self) -> u8 {
        match self {
            Task::Multiclass => 0,
            Task::Binary => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Task::Multiclass),
            1 => Some(Task::Binary),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Multiclass => "multiclass",
            Task::Binary => "binary",
        }
    }
}

/// One stored tensor of a model: the layer it belongs to, its role within
/// the layer, and whether the optimizer updates it.
#[derive(Debug, Clone, Copy)]
pub struct TensorInfo {
    pub layer: &'static str,
    pub layer_id: u8,
    pub name: &'static str,
    pub trainable: bool,
}

/// Behaviour shared by the two architectures.
pub trait Classifier: Parameters {
    type Cache;

    fn input_dim(&self) -> usize;
    fn num_classes(&self) -> usize;

    /// Class probabilities (`n × K`) plus everything the backward pass needs.
    fn forward(&self, x: &Matrix, mode: Mode, rng: &mut RandSource) -> Result<(Matrix, Self::Cache)>;

    /// Gradient of the mean cross-entropy w.r.t. every trainable tensor, in
    /// [`Parameters::tensors_mut`] order.
    fn backward(&self, cache: &Self::Cache, onehot: &Matrix) -> Result<Vec<Matrix>>;

    /// Folds train-mode side effects (batch-norm running statistics) back
    /// into the model after an optimizer step.
    fn commit_batch(&mut self, _cache: &Self::Cache) {}

    /// Every stored tensor (trainable first, then buffers), with metadata.
    fn state(&self) -> Vec<(TensorInfo, &Matrix)>;
    fn state_mut(&mut self) -> Vec<(TensorInfo, &mut Matrix)>;

    /// Table rows in graph order, without parameter counts.
    fn layout(&self) -> Vec<LayerRow>;

    /// Inference-mode probabilities.
    fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let mut unused = RandSource::new(0);
        Ok(self.forward(x, Mode::Infer, &mut unused)?.0)
    }

    fn param_names(&self) -> Vec<String> {
        self.state()
            .into_iter()
            .filter(|(info, _)| info.trainable)
            .map(|(info, _)| format!("{}.{}", info.layer, info.name))
            .collect()
    }
}

/// A model of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Tslt(TsltNet),
    Mlp(MlpNet),
}

#[derive(Debug, Clone)]
pub enum NetworkCache {
    Tslt(TsltCache),
    Mlp(MlpCache),
}

impl Network {
    pub fn build(arch: Architecture, input_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        Ok(match arch {
            Architecture::Tslt => Network::Tslt(build_tslt(input_dim, num_classes, seed)?),
            Architecture::Mlp => Network::Mlp(build_mlp(input_dim, num_classes, seed)?),
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Network::Tslt(_) => Architecture::Tslt,
            Network::Mlp(_) => Architecture::Mlp,
        }
    }

    /// Rounds every stored value through `f32`, the on-disk precision.
    pub fn quantize_f32(&mut self) {
        for (_, t) in self.state_mut() {
            for v in t.as_mut_slice() {
                *v = *v as f32 as f64;
            }
        }
    }
}

impl Parameters for Network {
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            Network::Tslt(n) => n.tensors_mut(),
            Network::Mlp(n) => n.tensors_mut(),
        }
    }
}

impl Classifier for Network {
    type Cache = NetworkCache;

    fn input_dim(&self) -> usize {
        match self {
            Network::Tslt(n) => n.input_dim(),
            Network::Mlp(n) => n.input_dim(),
        }
    }

    fn num_classes(&self) -> usize {
        match self {
            Network::Tslt(n) => n.num_classes(),
            Network::Mlp(n) => n.num_classes(),
        }
    }

    fn forward(&self, x: &Matrix, mode: Mode, rng: &mut RandSource) -> Result<(Matrix, NetworkCache)> {
        match self {
            Network::Tslt(n) => n.forward(x, mode, rng).map(|(p, c)| (p, NetworkCache::Tslt(c))),
            Network::Mlp(n) => n.forward(x, mode, rng).map(|(p, c)| (p, NetworkCache::Mlp(c))),
        }
    }

    fn backward(&self, cache: &NetworkCache, onehot: &Matrix) -> Result<Vec<Matrix>> {
        match (self, cache) {
            (Network::Tslt(n), NetworkCache::Tslt(c)) => n.backward(c, onehot),
            (Network::Mlp(n), NetworkCache::Mlp(c)) => n.backward(c, onehot),
            _ => Err(Error::StaleCache("cache belongs to a different architecture".into())),
        }
    }

    fn commit_batch(&mut self, cache: &NetworkCache) {
        if let (Network::Mlp(n), NetworkCache::Mlp(c)) = (self, cache) {
            n.commit_batch(c);
        }
    }

    fn state(&self) -> Vec<(TensorInfo, &Matrix)> {
        match self {
            Network::Tslt(n) => n.state(),
            Network::Mlp(n) => n.state(),
        }
    }

    fn state_mut(&mut self) -> Vec<(TensorInfo, &mut Matrix)> {
        match self {
            Network::Tslt(n) => n.state_mut(),
            Network::Mlp(n) => n.state_mut(),
        }
    }

    fn layout(&self) -> Vec<LayerRow> {
        match self {
            Network::Tslt(n) => n.layout(),
            Network::Mlp(n) => n.layout(),
        }
    }
}

pub(crate) fn check_dims(input_dim: usize, num_classes: usize) -> Result<()> {
    if input_dim == 0 {
        return Err(Error::InvalidArgument("input_dim must be at least 1".into()));
    }
    if num_classes < 2 {
        return Err(Error::InvalidArgument(format!(
            "num_classes must be at least 2, got {num_classes}"
        )));
    }
    Ok(())
}

pub(crate) fn check_input(op: &'static str, x: &Matrix, input_dim: usize) -> Result<()> {
    if x.cols() != input_dim {
        return Err(Error::Shape {
            op,
            left: x.shape(),
            right: (x.rows(), input_dim),
        });
    }
    Ok(())
}

pub(crate) fn check_onehot(op: &'static str, probs: &Matrix, onehot: &Matrix) -> Result<()> {
    if probs.shape() != onehot.shape() {
        return Err(Error::StaleCache(format!(
            "{op}: cache holds {:?} predictions but targets are {:?}",
            probs.shape(),
            onehot.shape()
        )));
    }
    Ok(())
}
