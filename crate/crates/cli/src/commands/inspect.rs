use std::fs;

use tslt_core::models::{count_params, FORMAT_VERSION};
use tslt_core::{Error, ModelBundle};

use crate::{CliResult, InspectArgs};

pub fn run(args: &InspectArgs) -> CliResult {
    let bundle = ModelBundle::load(&args.bundle)?;
    let file_size = fs::metadata(&args.bundle)
        .map_err(|e| Error::io(&args.bundle, e))?
        .len();
    let table = count_params(bundle.network());
    let state = bundle.preprocess();
    println!("bundle:         {}", args.bundle.display());
    println!("format version: {FORMAT_VERSION}");
    println!("architecture:   {}", bundle.architecture().name());
    println!("task:           {}", bundle.task().name());
    println!("input_dim:      {}", state.input_dim());
    println!("label column:   {}", state.label_column());
    println!(
        "classes ({}):    {}",
        bundle.class_names().len(),
        bundle.class_names().join(", ")
    );
    println!("file size:      {file_size} bytes");
    println!("weight payload: {} bytes", bundle.weight_payload_bytes());
    println!();
    println!("{table}");
    Ok(())
}
