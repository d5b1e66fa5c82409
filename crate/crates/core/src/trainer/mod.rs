//! Minibatch Adam training with early stopping.

mod adam;
mod early_stop;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use early_stop::{early_stop_update, EarlyStopUpdate, EarlyStopping, StopDecision};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layers::{cross_entropy, one_hot, Mode};
use crate::metrics::{argmax_labels, confusion, report, EvalReport};
use crate::models::{Architecture, Classifier, ModelBundle, Network, Task};
use crate::numcore::{Matrix, RandSource};
use crate::pipeline::{split_indices, FeatureMatrix, PreprocessState};

const VALIDATION_STREAM: u64 = 4;
const SHUFFLE_STREAM: u64 = 10;
const DROPOUT_STREAM: u64 = 11;
const EVAL_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            batch_size: 128,
            max_epochs: 50,
            patience: 5,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad(format!(
                "validation_fraction must lie in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be finite and ≥ 0, got {}",
                self.learning_rate
            ));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStopping,
    MaxEpochs,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::EarlyStopping => "early_stopping",
            StopReason::MaxEpochs => "max_epochs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    /// The per-epoch records as a JSON array.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.epochs).expect("history serializes")
    }
}

/// Inference-mode probabilities, computed in fixed-size row blocks.
pub fn predict_probs<C: Classifier + ?Sized>(model: &C, x: &Matrix) -> Result<Matrix> {
    let mut out = Vec::with_capacity(x.rows() * model.num_classes());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + EVAL_BLOCK).min(x.rows());
        let idx: Vec<usize> = (start..end).collect();
        out.extend(model.predict(&x.select_rows(&idx))?.into_vec());
        start = end;
    }
    Matrix::from_vec(x.rows(), model.num_classes(), out)
}

/// Loss and accuracy of `model` on `data`.
pub fn loss_and_accuracy<C: Classifier + ?Sized>(model: &C, data: &FeatureMatrix) -> Result<(f64, f64)> {
    let probs = predict_probs(model, &data.x)?;
    let loss = cross_entropy(&probs, &data.y)?;
    let pred = argmax_labels(&probs)?;
    let hits = pred.iter().zip(&data.y).filter(|(p, y)| p == y).count();
    Ok((loss, hits as f64 / data.n_rows().max(1) as f64))
}

/// Classification report of `model` on `data`.
pub fn evaluate<C: Classifier + ?Sized>(model: &C, data: &FeatureMatrix) -> Result<EvalReport> {
    let pred = argmax_labels(&predict_probs(model, &data.x)?)?;
    Ok(report(&confusion(&data.y, &pred, &data.class_names)?))
}

/// Splits `0..n` (already permuted) into batches of `size`, folding a
/// trailing single row into the previous batch when `min_rows` is 2.
fn batches(order: &[usize], size: usize, min_rows: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() < min_rows) {
        let n = out.len();
        let merged_start = (n - 2) * size;
        out.truncate(n - 2);
        out.push(&order[merged_start..]);
    }
    out
}

/// Trains `arch` on `data` and returns the best-validation-loss model.
pub fn train(
    arch: Architecture,
    task: Task,
    data: &FeatureMatrix,
    preprocess: PreprocessState,
    cfg: &TrainConfig,
) -> Result<(ModelBundle, TrainHistory)> {
    train_with_progress(arch, task, data, preprocess, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress(
    arch: Architecture,
    task: Task,
    data: &FeatureMatrix,
    preprocess: PreprocessState,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelBundle, TrainHistory)> {
    cfg.validate()?;
    let k = data.num_classes();
    if data.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Data("training data must contain at least 2 classes".into()));
    }
    if preprocess.num_classes() != k || preprocess.input_dim() != data.x.cols() {
        return Err(Error::InvalidArgument(
            "preprocessing state does not describe the training matrix".into(),
        ));
    }
    let (fit_idx, val_idx) = split_indices(&data.y, k, cfg.validation_fraction, cfg.seed, VALIDATION_STREAM, false)?;
    if val_idx.is_empty() || fit_idx.len() < 2 {
        return Err(Error::Data(format!(
            "{} rows are too few for a validation carve-out of {}",
            data.n_rows(),
            cfg.validation_fraction
        )));
    }
    let fit = data.select_rows(&fit_idx);
    let val = data.select_rows(&val_idx);

    let mut net = Network::build(arch, data.x.cols(), k, cfg.seed)?;
    let min_rows = match arch {
        Architecture::Mlp => 2,
        Architecture::Tslt => 1,
    };
    if cfg.batch_size < min_rows {
        return Err(Error::InvalidArgument(format!(
            "{} needs batches of at least {min_rows} rows",
            arch.name()
        )));
    }
    let adam = cfg.adam();
    let mut state = AdamState::for_model(&net);
    let mut shuffle = RandSource::with_stream(cfg.seed, SHUFFLE_STREAM);
    let mut dropout = RandSource::with_stream(cfg.seed, DROPOUT_STREAM);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let order = shuffle.permutation(fit.n_rows());
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for (b, idx) in batches(&order, cfg.batch_size, min_rows).into_iter().enumerate() {
            let xb = fit.x.select_rows(idx);
            let yb: Vec<usize> = idx.iter().map(|&i| fit.y[i]).collect();
            let (probs, cache) = net.forward(&xb, Mode::Train, &mut dropout)?;
            let loss = cross_entropy(&probs, &yb)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss,
                });
            }
            loss_sum += loss * idx.len() as f64;
            hits += argmax_labels(&probs)?.iter().zip(&yb).filter(|(p, y)| p == y).count();
            let grads = net.backward(&cache, &one_hot(&yb, k)?)?;
            adam_step(&mut net, &grads, &mut state, &adam).map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("epoch {epoch}, batch {}: {msg}", b + 1)),
                other => other,
            })?;
            net.commit_batch(&cache);
        }
        let (val_loss, val_acc) = loss_and_accuracy(&net, &val)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / fit.n_rows() as f64,
            train_acc: hits as f64 / fit.n_rows() as f64,
            val_loss,
            val_acc,
        };
        on_epoch(&record);
        epochs.push(record);
        if stopper.observe(epoch, val_loss, || net.clone()) == StopDecision::Stop {
            stop_reason = StopReason::EarlyStopping;
            break;
        }
    }

    let best_epoch = stopper
        .best_epoch()
        .ok_or_else(|| Error::NonFinite("validation loss was never finite; no weights to keep".into()))?;
    let best = stopper.into_best().expect("snapshot accompanies best epoch");
    let bundle = ModelBundle::new(best, preprocess, task)?;
    Ok((
        bundle,
        TrainHistory {
            epochs,
            best_epoch,
            stop_reason,
        },
    ))
}
