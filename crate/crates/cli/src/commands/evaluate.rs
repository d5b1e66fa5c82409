use tslt_core::pipeline::{read_csv, transform};
use tslt_core::trainer::evaluate;
use tslt_core::ModelBundle;

use crate::commands::write_text;
use crate::{CliResult, EvaluateArgs};

pub fn run(args: &EvaluateArgs) -> CliResult {
    let bundle = ModelBundle::load(&args.bundle)?;
    let label = args
        .label_column
        .as_deref()
        .unwrap_or_else(|| bundle.preprocess().label_column());
    let table = read_csv(&args.data, label)?;
    let fm = transform(bundle.preprocess(), &table)?;
    let report = evaluate(bundle.network(), &fm)?;
    if let Some(out) = &args.out {
        write_text(out, &report.to_json())?;
    }
    print!("{report}");
    Ok(())
}
