use crate::error::{Error, Result};
use crate::layers::Parameters;
use crate::models::Classifier;
use crate::numcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// First and second moment accumulators, one pair per trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
    names: Vec<String>,
}

impl AdamState {
    pub fn new(shapes: &[(usize, usize)], names: Vec<String>) -> Self {
        debug_assert_eq!(shapes.len(), names.len());
        let zeros: Vec<Matrix> = shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            names,
        }
    }

    pub fn for_model<C: Classifier + ?Sized>(model: &C) -> Self {
        let shapes: Vec<_> = model
            .state()
            .into_iter()
            .filter(|(info, _)| info.trainable)
            .map(|(_, t)| t.shape())
            .collect();
        Self::new(&shapes, model.param_names())
    }

    fn name(&self, i: usize) -> String {
        self.names.get(i).cloned().unwrap_or_else(|| format!("tensor {i}"))
    }
}

/// One bias-corrected Adam update. Gradients are validated before any
/// parameter or accumulator is touched.
pub fn adam_step<P: Parameters + ?Sized>(
    params: &mut P,
    grads: &[Matrix],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    let mut tensors = params.tensors_mut();
    if tensors.len() != grads.len() || state.m.len() != grads.len() {
        return Err(Error::InvalidArgument(format!(
            "{} parameter tensors, {} gradients, {} optimizer slots",
            tensors.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in tensors.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].shape() != g.shape() {
            return Err(Error::Shape {
                op: "adam_step",
                left: p.shape(),
                right: g.shape(),
            });
        }
        if let Some(pos) = g.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of {} has {} at flat index {pos}",
                state.name(i),
                g.as_slice()[pos]
            )));
        }
    }

    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in tensors
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let p = p.as_mut_slice();
        let m = m.as_mut_slice();
        let v = v.as_mut_slice();
        for (j, &gj) in g.as_slice().iter().enumerate() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}
