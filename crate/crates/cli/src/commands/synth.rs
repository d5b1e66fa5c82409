use std::io::Write;

use tslt_core::pipeline::{synth_dataset, ImbalanceProfile, SynthConfig};

use crate::{CliResult, ProfileArg, SynthArgs};

pub fn run(args: &SynthArgs) -> CliResult {
    let cfg = SynthConfig {
        classes: args.classes,
        features: args.features,
        rows: args.rows,
        separation: args.separation,
        profile: match args.profile {
            ProfileArg::Uniform => ImbalanceProfile::Uniform,
            ProfileArg::Skewed => ImbalanceProfile::Skewed,
        },
        seed: args.seed,
    };
    let summary = synth_dataset(&cfg, &args.out)?;
    // a closed pipe on stdout is not an error for a summary
    let _ = writeln!(
        std::io::stdout().lock(),
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}
