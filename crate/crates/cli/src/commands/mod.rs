pub mod evaluate;
pub mod inspect;
pub mod predict;
pub mod synth;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use tslt_core::Error;

use crate::CliResult;

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

/// `model.tslt` + `history.json` → `model.history.json`.
pub(crate) fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}
