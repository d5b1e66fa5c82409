use crate::error::{Error, Result};
use crate::numcore::{Matrix, RandSource};

/// Anything exposing its trainable tensors in a fixed order.
pub trait Parameters {
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;
}

impl Parameters for Vec<Matrix> {
    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.iter_mut().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(tensor index, flat element index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

/// Magnitudes below this are compared on an absolute scale; central
/// differences cannot resolve relative error on near-zero gradients.
const RELATIVE_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` gradients against central differences
/// `(L(θ+h) − L(θ−h)) / 2h` on up to `sample` randomly chosen entries
/// (every entry when `sample` covers them all). Parameters are restored
/// bit-exactly after each probe.
pub fn finite_difference_check<P, F>(
    target: &mut P,
    analytic: &[Matrix],
    h: f64,
    sample: usize,
    seed: u64,
    mut loss: F,
) -> Result<GradCheckReport>
where
    P: Parameters + ?Sized,
    F: FnMut(&P) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let shapes: Vec<(usize, usize)> = target.tensors_mut().iter().map(|t| t.shape()).collect();
    if shapes.len() != analytic.len() {
        return Err(Error::InvalidArgument(format!(
            "{} parameter tensors but {} gradient tensors",
            shapes.len(),
            analytic.len()
        )));
    }
    for (s, g) in shapes.iter().zip(analytic) {
        if *s != g.shape() {
            return Err(Error::Shape {
                op: "finite_difference_check",
                left: *s,
                right: g.shape(),
            });
        }
    }

    let mut positions: Vec<(usize, usize)> = shapes
        .iter()
        .enumerate()
        .flat_map(|(t, &(r, c))| (0..r * c).map(move |i| (t, i)))
        .collect();
    if sample < positions.len() {
        let mut rng = RandSource::new(seed);
        // partial Fisher–Yates: the first `sample` slots end up a uniform subset
        for i in 0..sample {
            let j = i + rng.below(positions.len() - i);
            positions.swap(i, j);
        }
        positions.truncate(sample);
    }

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (t, i) in positions {
        let original = target.tensors_mut()[t].as_slice()[i];

        target.tensors_mut()[t].as_mut_slice()[i] = original + h;
        let plus = loss(target)?;
        target.tensors_mut()[t].as_mut_slice()[i] = original - h;
        let minus = loss(target)?;
        target.tensors_mut()[t].as_mut_slice()[i] = original;

        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("loss while probing tensor {t} entry {i}")));
        }
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[t].as_slice()[i], numeric);
        if err > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = report.max_relative_error.max(err);
            report.worst = Some((t, i));
        }
        report.checked += 1;
    }
    Ok(report)
}
