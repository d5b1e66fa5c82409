use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;

use tslt_core::models::{Architecture, Task};
use tslt_core::pipeline::{fit_preprocessor, read_csv, stratified_indices, transform, BENIGN_CLASS};
use tslt_core::trainer::{evaluate, train_with_progress, TrainConfig};
use tslt_core::Error;

use crate::commands::{sibling, write_text};
use crate::{CliError, CliResult, ModelArg, TaskArg, TrainArgs};

pub fn run(args: &TrainArgs, quiet: bool) -> CliResult {
    let task = match args.task {
        TaskArg::Multiclass => Task::Multiclass,
        TaskArg::Binary => Task::Binary,
    };
    if task == Task::Multiclass && args.benign_label.is_some() {
        return Err(CliError::usage("--benign-label only applies to --task binary"));
    }
    let arch = match args.model {
        ModelArg::Tslt => Architecture::Tslt,
        ModelArg::Mlp => Architecture::Mlp,
    };
    let cfg = TrainConfig {
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        patience: args.patience,
        learning_rate: args.lr,
        validation_fraction: args.val_fraction,
        seed: args.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    if !(args.test_fraction > 0.0 && args.test_fraction < 1.0) {
        return Err(CliError::usage(format!(
            "--test-fraction must lie in (0, 1), got {}",
            args.test_fraction
        )));
    }

    let table = read_csv(&args.data, &args.label_column)?;
    if table.n_rows() == 0 {
        return Err(Error::Data(format!("{} has no data rows", args.data.display())).into());
    }

    // Split raw rows first so preprocessing statistics never see test rows.
    let index: BTreeMap<&str, usize> = table
        .labels()
        .iter()
        .map(String::as_str)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let y: Vec<usize> = table.labels().iter().map(|l| index[l.as_str()]).collect();
    let (train_idx, test_idx) = stratified_indices(&y, index.len(), args.test_fraction, args.seed)?;
    let train_rows = table.select_rows(&train_idx);
    let test_rows = table.select_rows(&test_idx);

    let mut state = fit_preprocessor(&train_rows)?;
    if task == Task::Binary {
        state = state.to_binary(args.benign_label.as_deref().unwrap_or(BENIGN_CLASS))?;
    }
    let train_fm = transform(&state, &train_rows)?;
    let test_fm = transform(&state, &test_rows)?;

    if !quiet {
        eprintln!(
            "training {} ({}) on {} rows, {} features, {} classes; {} test rows held out",
            arch.name(),
            task.name(),
            train_fm.n_rows(),
            state.input_dim(),
            state.num_classes(),
            test_fm.n_rows()
        );
    }
    let (bundle, history) = train_with_progress(arch, task, &train_fm, state, &cfg, |e| {
        if !quiet {
            eprintln!(
                "epoch {:>3}  loss {:.6}  acc {:.5}  val_loss {:.6}  val_acc {:.5}",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
            );
        }
    })?;

    bundle.save(&args.out)?;
    // Score the weights exactly as they were written to disk.
    let report = evaluate(bundle.quantized().network(), &test_fm)?;

    let history_out = args
        .history_out
        .clone()
        .unwrap_or_else(|| sibling(&args.out, "history.json"));
    let report_out = args
        .report_out
        .clone()
        .unwrap_or_else(|| sibling(&args.out, "report.json"));
    write_text(&history_out, &history.to_json())?;
    write_text(&report_out, &report.to_json())?;
    if let Some(path) = &args.test_out {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        test_rows.write_csv(BufWriter::new(file))?;
    }

    if !quiet {
        eprintln!(
            "stopped: {} after {} epochs; kept epoch {} (val_loss {:.6})",
            history.stop_reason.as_str(),
            history.epochs.len(),
            history.best_epoch,
            history.best().val_loss
        );
    }
    print!("{report}");
    println!("bundle: {}", args.out.display());
    Ok(())
}
