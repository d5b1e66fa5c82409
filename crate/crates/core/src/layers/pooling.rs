use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Averages each sample's `seq_len` rows: `(n · seq_len) × f → n × f`.
pub fn global_average_pool(x: &Matrix, seq_len: usize) -> Result<Matrix> {
    if seq_len == 0 || x.rows() % seq_len != 0 {
        return Err(Error::Shape {
            op: "global_average_pool",
            left: x.shape(),
            right: (seq_len, x.cols()),
        });
    }
    let samples = x.rows() / seq_len;
    let inv = 1.0 / seq_len as f64;
    let mut out = Matrix::zeros(samples, x.cols());
    for s in 0..samples {
        let o = out.row_mut(s);
        for r in 0..seq_len {
            for (acc, v) in o.iter_mut().zip(x.row(s * seq_len + r)) {
                *acc += v;
            }
        }
        o.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(out)
}

/// Spreads `upstream / seq_len` back onto every time step.
pub fn global_average_pool_backward(upstream: &Matrix, seq_len: usize) -> Matrix {
    let inv = 1.0 / seq_len as f64;
    let mut out = Matrix::zeros(upstream.rows() * seq_len, upstream.cols());
    for s in 0..upstream.rows() {
        for r in 0..seq_len {
            for (o, g) in out.row_mut(s * seq_len + r).iter_mut().zip(upstream.row(s)) {
                *o = g * inv;
            }
        }
    }
    out
}
