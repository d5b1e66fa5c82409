//! Confusion matrices and per-class classification reports.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|k| self.counts[k][k]).sum()
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }
}

/// Generic class names `"0"`, `"1"`, ... for unnamed label spaces.
pub fn numbered_classes(k: usize) -> Vec<String> {
    (0..k).map(|c| c.to_string()).collect()
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], class_names: &[String]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidArgument(format!(
            "{} true labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let k = class_names.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        if t >= k || p >= k {
            return Err(Error::InvalidArgument(format!(
                "sample {i}: label pair ({t}, {p}) out of range for {k} classes"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        class_names: class_names.to_vec(),
        counts,
    })
}

/// Index of each row's maximum; ties go to the lowest index.
pub fn argmax_labels(probs: &Matrix) -> Result<Vec<usize>> {
    if probs.cols() == 0 {
        return Err(Error::EmptyInput("argmax_labels"));
    }
    Ok(probs
        .iter_rows()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(0, |best, (j, &v)| if v > row[best] { j } else { best })
        })
        .collect())
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Five-decimal rendering used in report tables.
pub fn display5(v: f64) -> String {
    format!("{v:.5}")
}

/// Unweighted mean.
pub fn macro_average(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Display5 {
    pub precision: String,
    pub recall: String,
    pub f1: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub display: Display5,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AverageMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub display: Display5,
}

impl AverageMetrics {
    fn new(precision: f64, recall: f64, f1: f64) -> Self {
        Self {
            precision,
            recall,
            f1,
            display: Display5 {
                precision: display5(precision),
                recall: display5(recall),
                f1: display5(f1),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub accuracy_display: String,
    pub support: u64,
    pub macro_avg: AverageMetrics,
    pub weighted_avg: AverageMetrics,
    pub confusion: Vec<Vec<u64>>,
}

pub fn report(cm: &ConfusionMatrix) -> EvalReport {
    let k = cm.num_classes();
    let total = cm.total();
    let classes: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let support = cm.row_sum(c);
            let precision = ratio(tp, cm.col_sum(c));
            let recall = ratio(tp, support);
            let f1 = f1(precision, recall);
            ClassMetrics {
                name: cm.class_names[c].clone(),
                precision,
                recall,
                f1,
                support,
                display: Display5 {
                    precision: display5(precision),
                    recall: display5(recall),
                    f1: display5(f1),
                },
            }
        })
        .collect();
    let column = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).collect::<Vec<_>>();
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            classes.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64
        }
    };
    let macro_avg = AverageMetrics::new(
        macro_average(&column(|c| c.precision)),
        macro_average(&column(|c| c.recall)),
        macro_average(&column(|c| c.f1)),
    );
    let weighted_avg = AverageMetrics::new(weighted(|c| c.precision), weighted(|c| c.recall), weighted(|c| c.f1));
    let accuracy = ratio(cm.trace(), total);
    EvalReport {
        classes,
        accuracy,
        accuracy_display: display5(accuracy),
        support: total,
        macro_avg,
        weighted_avg,
        confusion: cm.counts.clone(),
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.classes.iter().map(|c| c.name.len()).max().unwrap_or(0).max(12);
        writeln!(
            f,
            "{:>width$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "", "precision", "recall", "f1-score", "support"
        )?;
        writeln!(f)?;
        for c in &self.classes {
            writeln!(
                f,
                "{:>width$}  {:>9}  {:>9}  {:>9}  {:>9}",
                c.name, c.display.precision, c.display.recall, c.display.f1, c.support
            )?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "{:>width$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "accuracy", "", "", self.accuracy_display, self.support
        )?;
        for (label, avg) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            writeln!(
                f,
                "{:>width$}  {:>9}  {:>9}  {:>9}  {:>9}",
                label, avg.display.precision, avg.display.recall, avg.display.f1, self.support
            )?;
        }
        Ok(())
    }
}
