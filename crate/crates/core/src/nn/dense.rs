use super::Tensor;
use crate::error::{Result, VadError};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

pub fn relu<F: Scalar>(t: &Tensor<F>) -> Tensor<F> {
    t.map(|v| v.max(F::zero()))
}

/// Masks `grad` by `output > 0`, where `output` is the relu output.
pub fn relu_backward<F: Scalar>(grad: &Tensor<F>, output: &Tensor<F>) -> Tensor<F> {
    let mut g = grad.clone();
    for (gv, &o) in g.values_mut().iter_mut().zip(output.values()) {
        if o <= F::zero() {
            *gv = F::zero();
        }
    }
    g
}

/// `act(Wᵀx + b)` for `W: n × m`. The input is read flat, so any tensor
/// with `n` elements is accepted.
pub fn dense<F: Scalar>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    bias: &Tensor<F>,
    activation: Activation,
) -> Result<Tensor<F>> {
    weights.expect_rank("dense weights", 2)?;
    let (n, m) = (weights.dims()[0], weights.dims()[1]);
    if input.len() != n {
        return Err(VadError::shape(format!(
            "dense layer expects {n} inputs, got {}",
            input.len()
        )));
    }
    bias.expect_dims("dense bias", &[m])?;
    let w = weights.values();
    let mut out = bias.values().to_vec();
    for (i, &x) in input.values().iter().enumerate() {
        if x == F::zero() {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(&w[i * m..(i + 1) * m]) {
            *o += x * wv;
        }
    }
    if activation == Activation::Relu {
        out.iter_mut().for_each(|v| *v = v.max(F::zero()));
    }
    Tensor::new(vec![m], out)
}

#[derive(Clone, Debug)]
pub struct DenseGrads<F> {
    pub input: Tensor<F>,
    pub weights: Tensor<F>,
    pub bias: Tensor<F>,
}

/// Gradients of a dense layer given its input, weights and (post-activation) output.
pub fn dense_backward<F: Scalar>(
    input: &Tensor<F>,
    weights: &Tensor<F>,
    output: &Tensor<F>,
    grad_out: &Tensor<F>,
    activation: Activation,
) -> Result<DenseGrads<F>> {
    weights.expect_rank("dense weights", 2)?;
    let (n, m) = (weights.dims()[0], weights.dims()[1]);
    if input.len() != n || output.len() != m || grad_out.len() != m {
        return Err(VadError::shape(
            "dense backward: operand sizes disagree with weights",
        ));
    }
    let pre = match activation {
        Activation::Relu => relu_backward(grad_out, output),
        Activation::None => grad_out.clone(),
    };
    let gp = pre.values();
    let w = weights.values();
    let mut gw = vec![F::zero(); n * m];
    let mut gx = vec![F::zero(); n];
    for (i, &x) in input.values().iter().enumerate() {
        let row = &w[i * m..(i + 1) * m];
        let grow = &mut gw[i * m..(i + 1) * m];
        let mut s = F::zero();
        for j in 0..m {
            grow[j] = x * gp[j];
            s += row[j] * gp[j];
        }
        gx[i] = s;
    }
    Ok(DenseGrads {
        input: Tensor::new(input.dims().to_vec(), gx)?,
        weights: Tensor::new(vec![n, m], gw)?,
        bias: Tensor::new(vec![m], gp.to_vec())?,
    })
}
