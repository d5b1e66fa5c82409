//! CSV ingestion, preprocessing, stratified splitting and the synthetic
//! flow generator.

mod preprocess;
mod split;
mod synth;
mod table;

pub use preprocess::{
    fit_preprocessor, to_binary_labels, transform, FeatureMatrix, FeatureSpec, FeatureStats, PreprocessState,
    RowEncoder, ANOMALY_CLASS, BENIGN_CLASS, STD_FLOOR,
};
pub(crate) use split::split_indices;
pub use split::{stratified_indices, stratified_split};
pub use synth::{synth_dataset, write_synth_csv, ImbalanceProfile, SynthConfig, SynthSummary};
pub use table::{is_missing, read_csv, ColumnData, ColumnKind, ColumnSchema, FlowTable};
