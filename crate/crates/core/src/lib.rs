//! Lightweight temporal-spatial transformer (TSLT-Net) for flow-based
//! intrusion detection.
//!
//! The crate is organized bottom-up:
//!
//! - [`numcore`]: dense matrices and the seeded random source
//! - [`layers`]: forward/backward kernels and the finite-difference checker
//! - [`models`]: the TSLT graph, the MLP baseline, parameter accounting and
//!   the on-disk model bundle
//! - [`pipeline`]: CSV ingestion, preprocessing, stratified splits and the
//!   synthetic flow generator
//! - [`trainer`]: Adam, early stopping and the training loop
//! - [`metrics`]: confusion matrices and classification reports

mod codec;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod numcore;
pub mod pipeline;
pub mod trainer;

pub use error::{Error, FormatError, Result};
pub use metrics::{ConfusionMatrix, EvalReport};
pub use models::{Architecture, Classifier, ModelBundle, Network, Task};
pub use numcore::{Matrix, RandSource};
pub use pipeline::{FeatureMatrix, FlowTable, PreprocessState};
pub use trainer::{TrainConfig, TrainHistory};
