use super::Tensor;
use crate::error::{Result, VadError};
use crate::scalar::Scalar;

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<F> {
    pub step_count: u64,
    pub m: Vec<Tensor<F>>,
    pub v: Vec<Tensor<F>>,
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub epsilon: F,
}

impl<F: Scalar> AdamState<F> {
    /// Zero moments shaped like `params`, with β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor<F>>, lr: F) -> Self {
        let m: Vec<Tensor<F>> = params.into_iter().map(Tensor::zeros_like).collect();
        Self {
            step_count: 0,
            v: m.clone(),
            m,
            lr,
            beta1: F::lit(0.9),
            beta2: F::lit(0.999),
            epsilon: F::lit(1e-8),
        }
    }
}

/// One bias-corrected Adam update. Nothing is modified if any gradient is
/// non-finite; the error names the offending parameter.
pub fn adam_step<F: Scalar>(
    params: &mut [&mut Tensor<F>],
    grads: &[Tensor<F>],
    names: &[&str],
    state: &mut AdamState<F>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(VadError::shape(format!(
            "adam: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.dims() != g.dims() || p.dims() != state.m[k].dims() {
            return Err(VadError::shape(format!(
                "adam: shape mismatch for parameter {k}"
            )));
        }
        if !g.is_finite() {
            let name = names.get(k).copied().unwrap_or("?");
            return Err(VadError::Training(format!(
                "non-finite gradient for parameter '{name}'"
            )));
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = F::one() - b1.powi(t);
    let bc2 = F::one() - b2.powi(t);
    for (k, p) in params.iter_mut().enumerate() {
        let g = grads[k].values();
        let m = state.m[k].values_mut();
        let v = state.v[k].values_mut();
        for (j, pv) in p.values_mut().iter_mut().enumerate() {
            m[j] = b1 * m[j] + (F::one() - b1) * g[j];
            v[j] = b2 * v[j] + (F::one() - b2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            *pv -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
