use super::Tensor;
use crate::scalar::Scalar;

/// Posteriors are clamped to `[LOSS_CLAMP, 1 - LOSS_CLAMP]` before the log.
pub const LOSS_CLAMP: f64 = 1e-7;

/// Max-shifted softmax.
pub fn softmax<F: Scalar>(logits: &Tensor<F>) -> Tensor<F> {
    let max = logits
        .values()
        .iter()
        .copied()
        .fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.values().iter().map(|&l| (l - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    Tensor::from_vec(exps.into_iter().map(|e| e / total).collect())
}

/// Cross-entropy of two-class softmax posteriors against `target`, and the
/// gradient of the composed softmax-plus-loss w.r.t. the logits.
pub fn bce_loss<F: Scalar>(posteriors: &Tensor<F>, target: usize) -> (F, Tensor<F>) {
    let lo = F::lit(LOSS_CLAMP);
    let p = posteriors.values()[target].max(lo).min(F::one() - lo);
    let mut grad = posteriors.clone();
    grad.values_mut()[target] -= F::one();
    (-p.ln(), grad)
}
