//! End-to-end acceptance checks, one verdict line per criterion.
//!
//! Criteria 1 to 10 gate the run; criterion 11 trains on a real flow corpus
//! and only runs when `TSLT_CORPUS_CSV` points at one.

use std::cell::Cell;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use tslt_cli::{run, EXIT_OK};
use tslt_core::layers::{
    cross_entropy, finite_difference_check, global_average_pool, global_average_pool_backward, one_hot,
    softmax_cross_entropy, Activation, BatchNormLayer, DenseLayer, Dropout, LayerNormLayer, MhaLayer, Mode, Parameters,
};
use tslt_core::metrics::{confusion, display5, macro_average, numbered_classes, report};
use tslt_core::models::{build_mlp, build_tslt, count_params, Architecture, Classifier, Network, Task};
use tslt_core::pipeline::{
    fit_preprocessor, stratified_indices, synth_dataset, transform, write_synth_csv, ColumnData, FeatureSpec,
    FeatureStats, FlowTable, PreprocessState, SynthConfig,
};
use tslt_core::trainer::{EarlyStopping, StopDecision};
use tslt_core::{FormatError, Matrix, ModelBundle, RandSource};

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(args: &[&str]) -> Result<(), String> {
    let mut full = vec!["tslt", "--quiet"];
    full.extend_from_slice(args);
    let code = run(full.iter().copied());
    ensure(code == EXIT_OK, || format!("`tslt {}` exited {code}", args.join(" ")))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

fn read_json(path: &Path) -> Result<serde_json::Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

fn normal(rows: usize, cols: usize, rng: &mut RandSource) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

// ---------------------------------------------------------------- C1

/// Runs `probe` on successive seeds until 20 report an error, skipping
/// seeds (returned as `None`) whose perturbations crossed a ReLU kink.
fn over_seeds(
    name: &str,
    tol: f64,
    mut probe: impl FnMut(u64) -> Result<Option<f64>, String>,
) -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut clean = 0;
    let mut skipped = 0;
    for seed in 0..200 {
        if clean == 20 {
            break;
        }
        match probe(seed)? {
            Some(err) => {
                ensure(err < tol, || {
                    format!("{name}: seed {seed} relative error {err:.3e} ≥ {tol:e}")
                })?;
                worst = worst.max(err);
                clean += 1;
            }
            None => skipped += 1,
        }
    }
    ensure(clean == 20, || {
        format!("{name}: only {clean} seeds without kink crossings")
    })?;
    let skip = if skipped > 0 {
        format!(", {skipped} kinked seeds skipped")
    } else {
        String::new()
    };
    Ok(format!("{name} {worst:.1e} < {tol:e}{skip}"))
}

fn check<P: Parameters + ?Sized>(
    target: &mut P,
    grads: &[Matrix],
    sample: usize,
    seed: u64,
    loss: impl FnMut(&P) -> tslt_core::Result<f64>,
) -> Result<f64, String> {
    finite_difference_check(target, grads, 1e-5, sample, seed, loss)
        .map(|r| r.max_relative_error)
        .map_err(|e| e.to_string())
}

fn relu_pattern(m: &Matrix) -> Vec<bool> {
    m.as_slice().iter().map(|&v| v > 0.0).collect()
}

fn gradient_fidelity() -> Verdict {
    let started = Instant::now();
    let mut lines = Vec::new();

    lines.push(over_seeds("dense", 1e-6, |seed| {
        let mut rng = RandSource::new(seed);
        let act = if seed % 2 == 0 {
            Activation::Relu
        } else {
            Activation::Identity
        };
        let mut layer = DenseLayer::glorot(5, 4, act, &mut rng);
        layer.bias = Matrix::from_fn(1, 4, |_, _| rng.uniform_range(-0.5, 0.5));
        let x = normal(6, 5, &mut rng);
        let proj = normal(6, 4, &mut rng);
        let (y, cache) = layer.forward(&x).map_err(|e| e.to_string())?;
        let base = relu_pattern(&y);
        let g = layer.backward(&cache, &proj).map_err(|e| e.to_string())?;
        let crossed = Cell::new(false);
        let e1 = check(&mut layer, &[g.weights, g.bias], usize::MAX, seed, |l| {
            let y = l.infer(&x)?;
            crossed.set(crossed.get() || relu_pattern(&y) != base);
            Ok(dot(&y, &proj))
        })?;
        let mut input = vec![x.clone()];
        let e2 = check(&mut input, &[g.input], usize::MAX, seed, |xs| {
            let y = layer.infer(&xs[0])?;
            crossed.set(crossed.get() || relu_pattern(&y) != base);
            Ok(dot(&y, &proj))
        })?;
        Ok((!crossed.get()).then_some(e1.max(e2)))
    })?);

    lines.push(over_seeds("layernorm", 1e-6, |seed| {
        let mut rng = RandSource::new(100 + seed);
        let mut ln = LayerNormLayer::new(8);
        ln.gamma = Matrix::from_fn(1, 8, |_, _| rng.uniform_range(0.5, 1.5));
        ln.beta = Matrix::from_fn(1, 8, |_, _| rng.uniform_range(-0.5, 0.5));
        let x = normal(32, 8, &mut rng);
        let proj = normal(32, 8, &mut rng);
        let (_, cache) = ln.forward(&x).map_err(|e| e.to_string())?;
        let g = ln.backward(&cache, &proj).map_err(|e| e.to_string())?;
        let e1 = check(&mut ln, &[g.gamma, g.beta], usize::MAX, seed, |l| {
            Ok(dot(&l.forward(&x)?.0, &proj))
        })?;
        let mut input = vec![x.clone()];
        let e2 = check(&mut input, &[g.input], usize::MAX, seed, |xs| {
            Ok(dot(&ln.forward(&xs[0])?.0, &proj))
        })?;
        Ok(Some(e1.max(e2)))
    })?);

    lines.push(over_seeds("softmax cross-entropy", 1e-6, |seed| {
        let mut rng = RandSource::new(seed);
        let k = 2 + seed as usize % 9;
        let labels: Vec<usize> = (0..7).map(|_| rng.below(k)).collect();
        let y = one_hot(&labels, k).map_err(|e| e.to_string())?;
        let logits = Matrix::from_fn(7, k, |_, _| rng.normal() * 2.0);
        let (_, grad) = softmax_cross_entropy(&logits, &y).map_err(|e| e.to_string())?;
        let mut params = vec![logits];
        let e = check(&mut params, &[grad], usize::MAX, seed, |p| {
            Ok(softmax_cross_entropy(&p[0], &y)?.0)
        })?;
        Ok(Some(e))
    })?);

    lines.push(over_seeds("global average pooling", 1e-6, |seed| {
        let mut rng = RandSource::new(300 + seed);
        let x = normal(48, 8, &mut rng);
        let proj = normal(3, 8, &mut rng);
        let grad = global_average_pool_backward(&proj, 16);
        let mut input = vec![x];
        let e = check(&mut input, &[grad], usize::MAX, seed, |xs| {
            Ok(dot(&global_average_pool(&xs[0], 16)?, &proj))
        })?;
        Ok(Some(e))
    })?);

    lines.push(over_seeds("dropout", 1e-6, |seed| {
        let mut rng = RandSource::new(400 + seed);
        let x = normal(6, 10, &mut rng);
        let proj = normal(6, 10, &mut rng);
        let dropout = Dropout::new(0.3).map_err(|e| e.to_string())?;
        let (_, mask) = dropout.apply(&x, Mode::Train, &mut RandSource::new(seed));
        let grad = Dropout::backward(&mask.expect("train mode masks"), &proj).map_err(|e| e.to_string())?;
        let mut input = vec![x];
        let e = check(&mut input, &[grad], usize::MAX, seed, |xs| {
            Ok(dot(
                &dropout.apply(&xs[0], Mode::Train, &mut RandSource::new(seed)).0,
                &proj,
            ))
        })?;
        Ok(Some(e))
    })?);

    lines.push(over_seeds("batch norm", 1e-6, |seed| {
        let mut rng = RandSource::new(900 + seed);
        let mut bn = BatchNormLayer::new(6);
        bn.gamma = Matrix::from_fn(1, 6, |_, _| rng.uniform_range(0.5, 1.5));
        bn.beta = Matrix::from_fn(1, 6, |_, _| rng.uniform_range(-0.5, 0.5));
        let x = normal(10, 6, &mut rng);
        let proj = normal(10, 6, &mut rng);
        let (_, cache) = bn.forward(&x, Mode::Train).map_err(|e| e.to_string())?;
        let g = bn.backward(&cache, &proj).map_err(|e| e.to_string())?;
        let e1 = check(&mut bn, &[g.gamma, g.beta], usize::MAX, seed, |l| {
            Ok(dot(&l.forward(&x, Mode::Train)?.0, &proj))
        })?;
        let mut input = vec![x.clone()];
        let e2 = check(&mut input, &[g.input], usize::MAX, seed, |xs| {
            Ok(dot(&bn.forward(&xs[0], Mode::Train)?.0, &proj))
        })?;
        Ok(Some(e1.max(e2)))
    })?);

    lines.push(over_seeds("multi-head attention", 1e-4, |seed| {
        let mut rng = RandSource::new(500 + seed);
        let mut layer = MhaLayer::glorot(2, 4, 8, 16, &mut rng);
        for b in [
            &mut layer.query_bias,
            &mut layer.key_bias,
            &mut layer.value_bias,
            &mut layer.output_bias,
        ] {
            for v in b.as_mut_slice() {
                *v = rng.uniform_range(-0.3, 0.3);
            }
        }
        let x = normal(32, 8, &mut rng);
        let proj = normal(32, 8, &mut rng);
        let (_, cache) = layer.forward(&x).map_err(|e| e.to_string())?;
        let g = layer.backward(&cache, &proj).map_err(|e| e.to_string())?;
        let input_grad = g.input.clone();
        let e1 = check(&mut layer, &g.into_params(), usize::MAX, seed, |l| {
            Ok(dot(&l.forward(&x)?.0, &proj))
        })?;
        let mut input = vec![x.clone()];
        let e2 = check(&mut input, &[input_grad], usize::MAX, seed, |xs| {
            Ok(dot(&layer.forward(&xs[0])?.0, &proj))
        })?;
        Ok(Some(e1.max(e2)))
    })?);

    lines.push(over_seeds("TSLT graph", 1e-4, |seed| {
        let mut net = build_tslt(10, 4, seed).map_err(|e| e.to_string())?;
        let mut rng = RandSource::new(100 + seed);
        let x = normal(6, 10, &mut rng);
        let y: Vec<usize> = (0..6).map(|_| rng.below(4)).collect();
        let (_, cache) = net
            .forward(&x, Mode::Train, &mut RandSource::new(seed))
            .map_err(|e| e.to_string())?;
        let base = cache.relu_pattern();
        let grads = net
            .backward(&cache, &one_hot(&y, 4).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let crossed = Cell::new(false);
        let e = check(&mut net, &grads, 200, seed, |n| {
            let (probs, c) = n.forward(&x, Mode::Train, &mut RandSource::new(seed))?;
            crossed.set(crossed.get() || c.relu_pattern() != base);
            cross_entropy(&probs, &y)
        })?;
        Ok((!crossed.get()).then_some(e))
    })?);

    lines.push(over_seeds("MLP graph", 1e-4, |seed| {
        let mut net = build_mlp(6, 3, seed).map_err(|e| e.to_string())?;
        let mut rng = RandSource::new(40 + seed);
        let x = normal(8, 6, &mut rng);
        let y: Vec<usize> = (0..8).map(|_| rng.below(3)).collect();
        let (_, cache) = net
            .forward(&x, Mode::Train, &mut RandSource::new(seed))
            .map_err(|e| e.to_string())?;
        let base = cache.relu_pattern();
        let grads = net
            .backward(&cache, &one_hot(&y, 3).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let crossed = Cell::new(false);
        let e = check(&mut net, &grads, 200, seed, |n| {
            let (probs, c) = n.forward(&x, Mode::Train, &mut RandSource::new(seed))?;
            crossed.set(crossed.get() || c.relu_pattern() != base);
            cross_entropy(&probs, &y)
        })?;
        Ok((!crossed.get()).then_some(e))
    })?);

    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:.1?}, limit 1 min")
    })?;
    Ok(format!("{} in {elapsed:.1?}", lines.join("; ")))
}

// ---------------------------------------------------------------- C2

fn architecture_conformance() -> Verdict {
    let mut notes = Vec::new();
    for (d, k) in [(63, 10), (32, 10), (5, 2), (100, 7)] {
        let net = build_tslt(d, k, 0).map_err(|e| e.to_string())?;
        let x = normal(3, d, &mut RandSource::new(1));
        let (probs, cache) = net
            .forward(&x, Mode::Train, &mut RandSource::new(2))
            .map_err(|e| e.to_string())?;
        ensure(probs.shape() == (3, k), || format!("output {:?}", probs.shape()))?;
        let shapes: Vec<Vec<usize>> = cache.stage_shapes().into_iter().map(|(_, s)| s).collect();
        let expected = vec![
            vec![128],
            vec![16, 8],
            vec![16, 8],
            vec![16, 8],
            vec![8],
            vec![64],
            vec![64],
            vec![k],
        ];
        ensure(shapes == expected, || format!("d={d} K={k}: stage shapes {shapes:?}"))?;

        let table = count_params(&net);
        let (input, layers) = table.rows.split_first().ok_or("empty layer table")?;
        ensure(input.output_shape == [d] && input.params == 0, || {
            format!("input row {input:?}")
        })?;
        let declared: Vec<Vec<usize>> = layers.iter().map(|r| r.output_shape.clone()).collect();
        ensure(declared == expected, || format!("table shapes {declared:?}"))?;
        let row = |name: &str| {
            table
                .rows
                .iter()
                .find(|r| r.name == name)
                .ok_or(format!("no {name} row"))
        };
        let dense1 = row("Dense_1")?;
        ensure(
            dense1.params == d * 128 + 128 && dense1.formula == Some("input_dim × 128 + 128"),
            || format!("Dense_1 {} {:?}", dense1.params, dense1.formula),
        )?;
        ensure(row("Dense_2")?.params == 576, || "Dense_2 ≠ 576".into())?;
        let output = row("Output")?;
        ensure(output.params == 64 * k + k, || format!("Output {}", output.params))?;
        ensure(
            table.total == table.rows.iter().map(|r| r.params).sum::<usize>(),
            || "total".into(),
        )?;

        let mha = row("MultiHeadAttention")?;
        let ln = row("LayerNormalization")?;
        ensure(mha.params == 288 && mha.reference_delta() == Some(288 - 1440), || {
            format!("MHA {} delta {:?}", mha.params, mha.reference_delta())
        })?;
        ensure(ln.params == 16 && ln.reference_delta() == Some(16 - 32), || {
            format!("LayerNorm {} delta {:?}", ln.params, ln.reference_delta())
        })?;
        if (d, k) == (63, 10) {
            notes.push(format!(
                "d=63 K=10 total {}; MHA stores {} (reference 1440, delta {:+}); LayerNorm stores {} (reference 32, delta {:+})",
                table.total,
                mha.params,
                mha.reference_delta().unwrap(),
                ln.params,
                ln.reference_delta().unwrap()
            ));
        }
    }
    Ok(notes.join(""))
}

// ---------------------------------------------------------------- C3, C4, C7

struct Scratch(tempfile::TempDir);

impl Scratch {
    fn new() -> Result<Self, String> {
        tempfile::tempdir().map(Scratch).map_err(|e| e.to_string())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn desk_multiclass() -> Verdict {
    let dir = Scratch::new()?;
    let data = dir.path("multi.csv");
    let summary = synth_dataset(&SynthConfig::new(10, 32, 20_000, 8.0, 7), &data).map_err(|e| e.to_string())?;
    ensure(summary.centroid_accuracy >= 0.99, || {
        format!("centroid oracle {}", summary.centroid_accuracy)
    })?;

    let started = Instant::now();
    let out = dir.path("multi.tslt");
    cli(&[
        "train",
        "--data",
        p(&data),
        "--label-column",
        "label",
        "--out",
        p(&out),
        "--epochs",
        "50",
    ])?;
    let elapsed = started.elapsed();
    let report = read_json(&dir.path("multi.report.json"))?;
    let history = read_json(&dir.path("multi.history.json"))?;
    let accuracy = report["accuracy"].as_f64().ok_or("no accuracy")?;
    let epochs = history.as_array().ok_or("history is not an array")?.len();
    ensure(accuracy >= 0.99, || format!("test accuracy {accuracy:.5}"))?;
    ensure(epochs <= 50, || format!("{epochs} epochs"))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:.1?}"))?;
    Ok(format!(
        "test accuracy {accuracy:.5} (centroid oracle {:.5}) after {epochs} epochs in {elapsed:.1?}",
        summary.centroid_accuracy
    ))
}

fn desk_binary() -> Verdict {
    let started = Instant::now();
    let dir = Scratch::new()?;
    let data = dir.path("binary.csv");
    synth_dataset(&SynthConfig::new(2, 16, 10_000, 8.0, 11), &data).map_err(|e| e.to_string())?;
    let out = dir.path("binary.tslt");
    cli(&[
        "train",
        "--data",
        p(&data),
        "--label-column",
        "label",
        "--task",
        "binary",
        "--out",
        p(&out),
    ])?;
    let elapsed = started.elapsed();
    let report = read_json(&dir.path("binary.report.json"))?;
    let accuracy = report["accuracy"].as_f64().ok_or("no accuracy")?;
    let anomaly = report["classes"]
        .as_array()
        .and_then(|c| c.iter().find(|c| c["name"] == "Anomaly"))
        .ok_or("no Anomaly row")?;
    let shown = anomaly["display"]["f1"].as_str().unwrap_or_default().to_string();
    ensure(accuracy == 1.0, || format!("test accuracy {accuracy}"))?;
    ensure(shown == "1.00000", || format!("Anomaly f1 shown as {shown}"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:.1?}"))?;
    Ok(format!("test accuracy 100.0%, Anomaly f1 {shown}, in {elapsed:.1?}"))
}

fn determinism() -> Verdict {
    let dir = Scratch::new()?;
    let data = dir.path("d.csv");
    synth_dataset(&SynthConfig::new(4, 12, 1500, 4.0, 3), &data).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (arch, run_id) in [("tslt", "a"), ("tslt", "b"), ("mlp", "c"), ("mlp", "d")] {
        let out = dir.path(&format!("{run_id}.tslt"));
        cli(&[
            "train",
            "--data",
            p(&data),
            "--label-column",
            "label",
            "--model",
            arch,
            "--epochs",
            "4",
            "--seed",
            "21",
            "--out",
            p(&out),
        ])?;
        let bundle = fs::read(&out).map_err(|e| e.to_string())?;
        let history = fs::read(dir.path(&format!("{run_id}.history.json"))).map_err(|e| e.to_string())?;
        outputs.push((bundle, history));
    }
    ensure(outputs[0] == outputs[1], || "TSLT runs differ".into())?;
    ensure(outputs[2] == outputs[3], || "MLP runs differ".into())?;
    Ok(format!(
        "TSLT bundle {} B and MLP bundle {} B, each bit-identical across two runs with their history",
        outputs[0].0.len(),
        outputs[2].0.len()
    ))
}

// ---------------------------------------------------------------- C5

fn synth_state(d: usize, k: usize) -> Result<PreprocessState, String> {
    let mut csv = Vec::new();
    write_synth_csv(&SynthConfig::new(k, d, 20 * k, 8.0, 0), &mut csv).map_err(|e| e.to_string())?;
    let table = FlowTable::from_reader(csv.as_slice(), "label").map_err(|e| e.to_string())?;
    fit_preprocessor(&table).map_err(|e| e.to_string())
}

fn footprint() -> Verdict {
    let dir = Scratch::new()?;
    let state = synth_state(63, 10)?;
    ensure(state.input_dim() == 63, || format!("input_dim {}", state.input_dim()))?;
    let mut sizes = Vec::new();
    for arch in [Architecture::Tslt, Architecture::Mlp] {
        let net = Network::build(arch, 63, 10, 0).map_err(|e| e.to_string())?;
        let bundle = ModelBundle::new(net, state.clone(), Task::Multiclass).map_err(|e| e.to_string())?;
        let path = dir.path(&format!("{}.tslt", arch.name()));
        bundle.save(&path).map_err(|e| e.to_string())?;
        let file = fs::metadata(&path).map_err(|e| e.to_string())?.len();
        sizes.push((bundle.weight_payload_bytes(), file));
    }
    let (tslt_payload, tslt_file) = sizes[0];
    let (mlp_payload, mlp_file) = sizes[1];
    ensure(tslt_payload == 38_888, || format!("TSLT payload {tslt_payload} B"))?;
    ensure(tslt_file < 50_000, || format!("TSLT file {tslt_file} B"))?;
    ensure(mlp_file >= 10 * tslt_file, || {
        format!("MLP file {mlp_file} B vs TSLT {tslt_file} B")
    })?;
    Ok(format!(
        "TSLT payload {tslt_payload} B, file {tslt_file} B; MLP payload {mlp_payload} B, file {mlp_file} B ({:.1}×)",
        mlp_file as f64 / tslt_file as f64
    ))
}

// ---------------------------------------------------------------- C6

fn metrics_oracle() -> Verdict {
    let mut rng = RandSource::new(2024);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    for case in 0..1000 {
        let k = 2 + rng.below(9);
        let n = 1 + rng.below(500);
        let y_true: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
        let y_pred: Vec<usize> = (0..n)
            .map(|i| if rng.uniform() < 0.6 { y_true[i] } else { rng.below(k) })
            .collect();
        let names = numbered_classes(k);
        let r = report(&confusion(&y_true, &y_pred, &names).map_err(|e| e.to_string())?);

        let mut macro_sum = [0.0; 3];
        let mut weighted_sum = [0.0; 3];
        for c in 0..k {
            let tp = (0..n).filter(|&i| y_true[i] == c && y_pred[i] == c).count() as f64;
            let fp = (0..n).filter(|&i| y_true[i] != c && y_pred[i] == c).count() as f64;
            let fn_ = (0..n).filter(|&i| y_true[i] == c && y_pred[i] != c).count() as f64;
            let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            let support = tp + fn_;
            let got = &r.classes[c];
            ensure(
                close(got.precision, precision)
                    && close(got.recall, recall)
                    && close(got.f1, f1)
                    && got.support as f64 == support,
                || format!("case {case} class {c}: {got:?} vs p={precision} r={recall} f1={f1} s={support}"),
            )?;
            for (i, m) in [precision, recall, f1].into_iter().enumerate() {
                macro_sum[i] += m;
                weighted_sum[i] += m * support;
            }
        }
        let accuracy = (0..n).filter(|&i| y_true[i] == y_pred[i]).count() as f64 / n as f64;
        let m = &r.macro_avg;
        let w = &r.weighted_avg;
        let kf = k as f64;
        let nf = n as f64;
        ensure(
            close(r.accuracy, accuracy)
                && close(m.precision, macro_sum[0] / kf)
                && close(m.recall, macro_sum[1] / kf)
                && close(m.f1, macro_sum[2] / kf)
                && close(w.precision, weighted_sum[0] / nf)
                && close(w.recall, weighted_sum[1] / nf)
                && close(w.f1, weighted_sum[2] / nf),
            || format!("case {case}: averages disagree"),
        )?;
    }

    let listed = [1.0, 0.99999, 1.0, 0.99692, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    let shown = display5(macro_average(&listed));
    ensure(shown == "0.99969", || {
        format!("macro precision spot check shows {shown}")
    })?;
    Ok(format!(
        "1000 random cases agree to 1e-12; ten-class macro precision spot check shows {shown}"
    ))
}

// ---------------------------------------------------------------- C8

fn early_stopping() -> Verdict {
    let losses = [1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95];
    let mut stopper = EarlyStopping::new(5);
    let mut stopped_at = None;
    for (i, &loss) in losses.iter().enumerate() {
        let epoch = i + 1;
        let weights = Matrix::filled(2, 2, epoch as f64);
        if stopper.observe(epoch, loss, || weights) == StopDecision::Stop {
            stopped_at = Some(epoch);
            break;
        }
    }
    ensure(stopped_at == Some(7), || format!("stopped at {stopped_at:?}"))?;
    ensure(stopper.best_epoch() == Some(2), || {
        format!("best epoch {:?}", stopper.best_epoch())
    })?;
    let best_loss = stopper.best_loss();
    ensure(best_loss == 0.9, || format!("best loss {best_loss}"))?;
    let restored = stopper.into_best().ok_or("no snapshot kept")?;
    ensure(restored == Matrix::filled(2, 2, 2.0), || {
        "restored weights are not epoch 2's".into()
    })?;
    Ok(format!(
        "stopped after epoch 7, restored epoch-2 weights, reported val loss {best_loss}"
    ))
}

// ---------------------------------------------------------------- C9

fn preprocessing() -> Verdict {
    // standardization on a synthetic table
    let mut csv = Vec::new();
    let summary = write_synth_csv(&SynthConfig::new(5, 12, 2000, 6.0, 13), &mut csv).map_err(|e| e.to_string())?;
    let table = FlowTable::from_reader(csv.as_slice(), "label").map_err(|e| e.to_string())?;
    let state = fit_preprocessor(&table).map_err(|e| e.to_string())?;
    let fm = transform(&state, &table).map_err(|e| e.to_string())?;
    let mut worst_mean = 0.0f64;
    let mut worst_std = 0.0f64;
    let mut checked = 0;
    for (j, spec) in state.features().iter().enumerate() {
        let FeatureStats::Numeric { std, .. } = spec.stats else {
            continue;
        };
        if std <= 1e-12 {
            continue;
        }
        // imputed cells sit at the median, so the standardization identity
        // is asserted over the observed cells of a column
        let Some(ColumnData::Numeric(raw)) = table.column(&spec.name) else {
            return Err(format!("{} is not a numeric column", spec.name));
        };
        let observed: Vec<f64> = (0..fm.n_rows())
            .filter(|&i| raw[i].is_some())
            .map(|i| fm.x.get(i, j))
            .collect();
        let n = observed.len() as f64;
        let mean = observed.iter().sum::<f64>() / n;
        let sd = (observed.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_std = worst_std.max((sd - 1.0).abs());
        checked += 1;
    }
    ensure(worst_mean < 1e-9, || format!("column mean {worst_mean:e}"))?;
    ensure(worst_std < 1e-9, || format!("column std off by {worst_std:e}"))?;

    // hand-computed imputation
    let fixture = "\
rate,proto,label
3,tcp,A
1,udp,B
,,A
4,tcp,B
1,udp,A
5,icmp,B
9,udp,A
,tcp,B
2,,A
6,,B
";
    let table = FlowTable::from_reader(fixture.as_bytes(), "label").map_err(|e| e.to_string())?;
    let state = fit_preprocessor(&table).map_err(|e| e.to_string())?;
    let fm = transform(&state, &table).map_err(|e| e.to_string())?;
    let rate = &state.features()[0];
    let proto = &state.features()[1];
    let FeatureStats::Numeric { median, mean, std } = rate.stats else {
        return Err("rate is not numeric".into());
    };
    ensure(
        median == 3.5 && mean == 3.875 && (std - 6.609375f64.sqrt()).abs() < 1e-15,
        || format!("rate median {median} mean {mean} std {std}"),
    )?;
    let FeatureStats::Categorical { mode, categories } = &proto.stats else {
        return Err("proto is not categorical".into());
    };
    ensure(mode == "tcp" && categories == &["icmp", "tcp", "udp"], || {
        format!("proto mode {mode} {categories:?}")
    })?;
    let imputed_rate = (3.5 - 3.875) / 6.609375f64.sqrt();
    for row in [2, 7] {
        ensure((fm.x.get(row, 0) - imputed_rate).abs() < 1e-15, || {
            format!("row {row} rate {}", fm.x.get(row, 0))
        })?;
    }
    for row in [2, 8, 9] {
        ensure(fm.x.get(row, 1) == 1.0, || {
            format!("row {row} proto code {}", fm.x.get(row, 1))
        })?;
    }

    // stratified split proportions
    let mut rng = RandSource::new(8);
    let mut splits = 0;
    for seed in 0..200 {
        let k = 2 + rng.below(8);
        let counts: Vec<usize> = (0..k).map(|_| 2 + rng.below(300)).collect();
        let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect();
        let (train, test) = stratified_indices(&labels, k, 0.2, seed).map_err(|e| e.to_string())?;
        ensure(train.len() + test.len() == labels.len(), || {
            "split is not a partition".into()
        })?;
        for (c, &n) in counts.iter().enumerate() {
            let got = test.iter().filter(|&&i| labels[i] == c).count() as f64;
            ensure((got - 0.2 * n as f64).abs() <= 1.0, || {
                format!("class {c}: {got} of {n} in test")
            })?;
        }
        splits += 1;
    }
    Ok(format!(
        "{checked} numeric columns standardized (|mean| {worst_mean:.1e}, |std−1| {worst_std:.1e}, {} cells imputed); \
         10-row fixture median 3.5 and mode tcp; {splits} splits within ±1 of 0.2·n_c",
        summary.blanked_cells
    ))
}

// ---------------------------------------------------------------- C10

fn random_state(rng: &mut RandSource, d: usize, k: usize) -> Result<PreprocessState, String> {
    let features = (0..d)
        .map(|j| {
            let stats = if rng.uniform() < 0.8 {
                FeatureStats::Numeric {
                    median: rng.normal(),
                    mean: rng.normal(),
                    std: 0.1 + rng.uniform(),
                }
            } else {
                let n = 1 + rng.below(5);
                let categories: Vec<String> = (0..n).map(|c| format!("v{c}")).collect();
                FeatureStats::Categorical {
                    mode: categories[rng.below(n)].clone(),
                    categories,
                }
            };
            FeatureSpec {
                name: format!("f{j}"),
                stats,
            }
        })
        .collect();
    PreprocessState::new("label", features, numbered_classes(k)).map_err(|e| e.to_string())
}

fn serialization() -> Verdict {
    let dir = Scratch::new()?;
    let path = dir.path("fuzz.tslt");
    let mut rng = RandSource::new(77);
    let mut mlp_runs = 0;
    for i in 0..10_000 {
        let d = 1 + rng.below(24);
        let k = 2 + rng.below(9);
        let arch = if i % 20 == 0 {
            Architecture::Mlp
        } else {
            Architecture::Tslt
        };
        let task = if k == 2 && rng.uniform() < 0.5 {
            Task::Binary
        } else {
            Task::Multiclass
        };
        let net = Network::build(arch, d, k, rng.next_u64()).map_err(|e| e.to_string())?;
        let state = random_state(&mut rng, d, k)?;
        let bundle = ModelBundle::new(net, state, task).map_err(|e| e.to_string())?;
        let loaded = if i % 10 == 0 {
            bundle.save(&path).map_err(|e| e.to_string())?;
            ModelBundle::load(&path).map_err(|e| format!("iteration {i}: {e}"))?
        } else {
            ModelBundle::from_bytes(&bundle.to_bytes()).map_err(|e| format!("iteration {i}: {e}"))?
        };
        ensure(loaded == bundle.quantized(), || {
            format!("iteration {i}: round trip is lossy")
        })?;
        ensure(loaded.to_bytes() == bundle.to_bytes(), || {
            format!("iteration {i}: bytes differ")
        })?;
        mlp_runs += usize::from(arch == Architecture::Mlp);
    }

    let net = build_tslt(63, 10, 0).map_err(|e| e.to_string())?;
    let bundle =
        ModelBundle::new(Network::Tslt(net), synth_state(63, 10)?, Task::Multiclass).map_err(|e| e.to_string())?;
    let bytes = bundle.to_bytes();
    let truncated = ModelBundle::from_bytes(&bytes[..bytes.len() - 7]);
    let mut corrupted = bytes.clone();
    corrupted[bytes.len() / 2] ^= 0x10;
    let corrupted = ModelBundle::from_bytes(&corrupted);
    ensure(matches!(truncated, Err(FormatError::Truncated)), || {
        format!("truncated file gave {truncated:?}")
    })?;
    ensure(matches!(corrupted, Err(FormatError::Checksum { .. })), || {
        format!("corrupted file gave {corrupted:?}")
    })?;

    fs::write(&path, &bytes[..bytes.len() / 3]).map_err(|e| e.to_string())?;
    let on_disk = ModelBundle::load(&path)
        .map_err(|e| e.to_string())
        .err()
        .unwrap_or_default();
    ensure(on_disk.contains("truncated"), || {
        format!("truncated file on disk: {on_disk}")
    })?;
    Ok(format!(
        "10000 round trips lossless at f32 ({mlp_runs} MLP, 1000 through files); truncated → \"{}\", corrupted → \"{}\"",
        FormatError::Truncated,
        corrupted.unwrap_err()
    ))
}

// ---------------------------------------------------------------- C11

fn real_corpus() -> Option<Verdict> {
    let data = std::env::var_os("TSLT_CORPUS_CSV")?;
    let label = std::env::var("TSLT_CORPUS_LABEL").unwrap_or_else(|_| "label".into());
    Some((|| {
        let dir = Scratch::new()?;
        let out = dir.path("corpus.tslt");
        let started = Instant::now();
        let data = PathBuf::from(data);
        cli(&["train", "--data", p(&data), "--label-column", &label, "--out", p(&out)])?;
        let report = read_json(&dir.path("corpus.report.json"))?;
        Ok(format!(
            "test accuracy {} in {:.1?} (reference point 0.99990)",
            report["accuracy_display"].as_str().unwrap_or("?"),
            started.elapsed()
        ))
    })())
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("gradient fidelity", gradient_fidelity),
        ("architecture conformance", architecture_conformance),
        ("desk-scale multiclass", desk_multiclass),
        ("desk-scale binary", desk_binary),
        ("footprint", footprint),
        ("metrics oracle", metrics_oracle),
        ("determinism", determinism),
        ("early stopping", early_stopping),
        ("preprocessing", preprocessing),
        ("serialization", serialization),
    ];
    let mut failed = Vec::new();
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let n = i + 1;
        match criterion() {
            Ok(detail) => println!("[PASS] C{n} {name}: {detail}"),
            Err(why) => {
                println!("[FAIL] C{n} {name}: {why}");
                failed.push(n);
            }
        }
    }
    match real_corpus() {
        None => println!("[SKIP] C11 real corpus (optional): set TSLT_CORPUS_CSV to a labelled flow CSV"),
        Some(Ok(detail)) => println!("[INFO] C11 real corpus (optional): {detail}"),
        Some(Err(why)) => println!("[INFO] C11 real corpus (optional, non-gating) did not complete: {why}"),
    }
    if !failed.is_empty() {
        println!("acceptance: criteria {failed:?} failed");
        std::process::exit(1);
    }
    println!("acceptance: criteria 1-10 passed");
}
