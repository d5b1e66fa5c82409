use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numcore::RandSource;
use crate::pipeline::preprocess::BENIGN_CLASS;

const ATTACK_CLASSES: [&str; 9] = [
    "DoS Attack",
    "Injection",
    "IP Spoofing",
    "MITM",
    "Password Cracking",
    "Payload Manipulation",
    "Replay",
    "Unauthorized UDP",
    "Video Interception",
];
const PROTOCOLS: [&str; 5] = ["tcp", "udp", "icmp", "http", "mavlink"];
const BENIGN_SHARE: f64 = 0.5442;
const SKEW_RATIO: f64 = 0.6;
const BLANK_FRACTION: f64 = 0.05;
const MIN_PER_CLASS: usize = 2;
const DIRECTION_STREAM: u64 = 2;
const ROW_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ImbalanceProfile {
    Uniform,
    /// About 54% benign, attacks decaying geometrically.
    Skewed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub classes: usize,
    /// Feature count: `features − 1` numeric columns plus one categorical.
    pub features: usize,
    pub rows: usize,
    pub separation: f64,
    pub profile: ImbalanceProfile,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(classes: usize, features: usize, rows: usize, separation: f64, seed: u64) -> Self {
        Self {
            classes,
            features,
            rows,
            separation,
            profile: ImbalanceProfile::Uniform,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.features < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 features, got {}",
                self.features
            )));
        }
        if self.rows < 10 * self.classes {
            return Err(Error::InvalidArgument(format!(
                "need at least {} rows for {} classes, got {}",
                10 * self.classes,
                self.classes,
                self.rows
            )));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "separation must be finite and ≥ 0, got {}",
                self.separation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub rows: usize,
    pub columns: Vec<String>,
    pub label_column: String,
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub blanked_column: String,
    pub blanked_cells: usize,
    /// Accuracy of assigning each row to the nearest true class mean.
    pub centroid_accuracy: f64,
}

fn class_names(k: usize) -> Vec<String> {
    (0..k)
        .map(|c| match c {
            0 => BENIGN_CLASS.to_string(),
            c if c <= ATTACK_CLASSES.len() => ATTACK_CLASSES[c - 1].to_string(),
            c => format!("Class{c}"),
        })
        .collect()
}

/// Largest-remainder apportionment of `n` rows to `shares`, with every
/// class receiving at least [`MIN_PER_CLASS`].
fn apportion(n: usize, shares: &[f64]) -> Vec<usize> {
    let total: f64 = shares.iter().sum();
    let exact: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        (exact[b] - exact[b].floor())
            .total_cmp(&(exact[a] - exact[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &c in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[c] += 1;
        left -= 1;
    }
    for c in 0..counts.len() {
        while counts[c] < MIN_PER_CLASS {
            let donor = (0..counts.len())
                .max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))
                .expect("non-empty");
            counts[donor] -= 1;
            counts[c] += 1;
        }
    }
    counts
}

fn shares(profile: ImbalanceProfile, k: usize) -> Vec<f64> {
    match profile {
        ImbalanceProfile::Uniform => vec![1.0; k],
        ImbalanceProfile::Skewed => {
            let weights: Vec<f64> = (0..k - 1).map(|i| SKEW_RATIO.powi(i as i32)).collect();
            let sum: f64 = weights.iter().sum();
            std::iter::once(BENIGN_SHARE)
                .chain(weights.iter().map(|w| (1.0 - BENIGN_SHARE) * w / sum))
                .collect()
        }
    }
}

/// Seeded unit directions, made mutually orthogonal when the dimension
/// allows it.
fn directions(k: usize, dim: usize, rng: &mut RandSource) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        if out.len() < dim {
            for u in &out {
                let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        out.push(v);
    }
    out
}

/// Writes a labelled synthetic flow table as CSV.
pub fn write_synth_csv<W: Write>(cfg: &SynthConfig, writer: W) -> Result<SynthSummary> {
    cfg.validate()?;
    let k = cfg.classes;
    let dim = cfg.features - 1;
    let names = class_names(k);
    let means: Vec<Vec<f64>> = directions(k, dim, &mut RandSource::with_stream(cfg.seed, DIRECTION_STREAM))
        .into_iter()
        .map(|u| u.into_iter().map(|a| a * cfg.separation).collect())
        .collect();
    let counts = apportion(cfg.rows, &shares(cfg.profile, k));

    let mut rng = RandSource::with_stream(cfg.seed, ROW_STREAM);
    let mut labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat(c).take(n))
        .collect();
    rng.shuffle(&mut labels);
    let blanked_cells = (BLANK_FRACTION * cfg.rows as f64).round() as usize;
    let mut blank = vec![false; cfg.rows];
    for i in rng.permutation(cfg.rows).into_iter().take(blanked_cells) {
        blank[i] = true;
    }
    let association = 0.8 * (cfg.separation / 8.0).clamp(0.0, 1.0);

    let mut columns: Vec<String> = (1..=dim).map(|j| format!("f{j:02}")).collect();
    columns.push("protocol".into());
    columns.push("label".into());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&columns)?;

    let mut correct = 0usize;
    let mut x = vec![0.0; dim];
    let mut record: Vec<String> = Vec::with_capacity(dim + 2);
    for (i, &c) in labels.iter().enumerate() {
        for (v, m) in x.iter_mut().zip(&means[c]) {
            *v = m + rng.normal();
        }
        let protocol = if rng.uniform() < association {
            PROTOCOLS[c % PROTOCOLS.len()]
        } else {
            PROTOCOLS[rng.below(PROTOCOLS.len())]
        };

        let start = usize::from(blank[i]);
        let nearest = (0..k)
            .min_by(|&a, &b| {
                let da: f64 = (start..dim).map(|j| (x[j] - means[a][j]).powi(2)).sum();
                let db: f64 = (start..dim).map(|j| (x[j] - means[b][j]).powi(2)).sum();
                da.total_cmp(&db)
            })
            .expect("k ≥ 2");
        correct += usize::from(nearest == c);

        record.clear();
        record.extend(x.iter().enumerate().map(|(j, v)| {
            if j == 0 && blank[i] {
                String::new()
            } else {
                format!("{v:.6}")
            }
        }));
        record.push(protocol.to_string());
        record.push(names[c].clone());
        w.write_record(&record)?;
    }
    w.flush()
        .map_err(|e| Error::Data(format!("writing synthetic CSV: {e}")))?;

    Ok(SynthSummary {
        rows: cfg.rows,
        label_column: "label".into(),
        blanked_column: columns[0].clone(),
        columns,
        class_names: names,
        class_counts: counts,
        blanked_cells,
        centroid_accuracy: correct as f64 / cfg.rows as f64,
    })
}

/// Writes a synthetic flow table to `path`.
pub fn synth_dataset(cfg: &SynthConfig, path: impl AsRef<Path>) -> Result<SynthSummary> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_synth_csv(cfg, BufWriter::new(file))
}
