use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::time::Instant;

use tslt_core::trainer::predict_probs;
use tslt_core::{Error, Matrix, ModelBundle};

use crate::{CliError, CliResult, PredictArgs};

pub fn run(args: &PredictArgs, quiet: bool) -> CliResult {
    if args.block_rows == 0 {
        return Err(CliError::usage("--block-rows must be at least 1"));
    }
    let bundle = ModelBundle::load(&args.bundle)?;
    let file = File::open(&args.data).map_err(|e| Error::io(&args.data, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(file));
    let headers: Vec<String> = reader
        .headers()
        .map_err(Error::from)?
        .iter()
        .map(String::from)
        .collect();
    let encoder = bundle.preprocess().encoder_for(&headers)?;

    let sink: Box<dyn Write> = if args.out.as_os_str() == "-" {
        Box::new(io::stdout().lock())
    } else {
        Box::new(File::create(&args.out).map_err(|e| Error::io(&args.out, e))?)
    };
    let mut writer = csv::Writer::from_writer(BufWriter::new(sink));
    let classes = bundle.class_names();
    let mut header = vec!["row".to_string(), "predicted".to_string()];
    header.extend(classes.iter().map(|c| format!("prob_{c}")));
    writer.write_record(&header).map_err(Error::from)?;

    let d = bundle.preprocess().input_dim();
    let started = Instant::now();
    let mut block = Vec::with_capacity(args.block_rows * d);
    let mut row = 0usize;
    let mut record = csv::StringRecord::new();
    let mut flush = |block: &mut Vec<f64>, first_row: usize| -> CliResult {
        if block.is_empty() {
            return Ok(());
        }
        let x = Matrix::from_vec(block.len() / d, d, std::mem::take(block))?;
        let probs = predict_probs(bundle.network(), &x)?;
        let mut out = Vec::with_capacity(classes.len() + 2);
        for (i, p) in probs.iter_rows().enumerate() {
            // first maximum wins ties
            let best = p.iter().enumerate().fold(0, |b, (j, &v)| if v > p[b] { j } else { b });
            out.clear();
            out.push((first_row + i).to_string());
            out.push(classes[best].clone());
            out.extend(p.iter().map(|v| v.to_string()));
            writer.write_record(&out).map_err(Error::from)?;
        }
        Ok(())
    };
    let mut block_start = 0;
    while reader.read_record(&mut record).map_err(Error::from)? {
        let start = block.len();
        block.resize(start + d, 0.0);
        encoder.encode(&record, row + 1, &mut block[start..])?;
        row += 1;
        if block.len() == args.block_rows * d {
            flush(&mut block, block_start)?;
            block_start = row;
        }
    }
    flush(&mut block, block_start)?;
    writer
        .flush()
        .map_err(|e| CliError::from(Error::Data(format!("writing predictions: {e}"))))?;

    if !quiet {
        let secs = started.elapsed().as_secs_f64();
        eprintln!(
            "predicted {row} rows in {secs:.3} s ({:.0} rows/s) with a {} bundle",
            row as f64 / secs.max(1e-9),
            bundle.architecture().name()
        );
    }
    Ok(())
}
