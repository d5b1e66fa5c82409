use crate::error::{Error, Result};
use crate::numcore::Matrix;

const LOG_FLOOR: f64 = 1e-12;

pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), classes);
    for (r, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::InvalidArgument(format!(
                "label {y} at row {r} is outside [0, {classes})"
            )));
        }
        m.set(r, y, 1.0);
    }
    Ok(m)
}

fn true_class(onehot: &[f64], row: usize) -> Result<usize> {
    let mut found = None;
    for (k, &v) in onehot.iter().enumerate() {
        if v == 1.0 && found.is_none() {
            found = Some(k);
        } else if v != 0.0 {
            found = None;
            break;
        }
    }
    found.ok_or_else(|| Error::InvalidArgument(format!("row {row} is not a one-hot vector")))
}

/// Mean categorical cross-entropy of `softmax(logits)` against one-hot
/// targets, with the fused gradient `(p − y) / n` w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &Matrix, onehot: &Matrix) -> Result<(f64, Matrix)> {
    if logits.shape() != onehot.shape() {
        return Err(Error::Shape {
            op: "softmax_cross_entropy",
            left: logits.shape(),
            right: onehot.shape(),
        });
    }
    let probs = logits.rowwise_softmax();
    let n = logits.rows().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for r in 0..logits.rows() {
        let k = true_class(onehot.row(r), r)?;
        loss -= (probs.get(r, k) + LOG_FLOOR).ln();
        let g = grad.row_mut(r);
        g[k] -= 1.0;
        g.iter_mut().for_each(|v| *v /= n);
    }
    Ok((loss / n, grad))
}

/// Mean cross-entropy from probabilities and integer labels.
pub fn cross_entropy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    if probs.rows() != labels.len() {
        return Err(Error::Shape {
            op: "cross_entropy",
            left: probs.shape(),
            right: (labels.len(), 1),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("cross_entropy"));
    }
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        if y >= probs.cols() {
            return Err(Error::InvalidArgument(format!(
                "label {y} outside [0, {})",
                probs.cols()
            )));
        }
        loss -= (probs.get(r, y) + LOG_FLOOR).ln();
    }
    Ok(loss / labels.len() as f64)
}
