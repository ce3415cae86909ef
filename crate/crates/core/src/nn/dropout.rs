use rand::Rng;

use super::Tensor;
use crate::scalar::Scalar;

/// Dropout output and the multiplicative mask that produced it.
#[derive(Clone, Debug)]
pub struct Dropout<F> {
    pub output: Tensor<F>,
    /// `None` when dropout was the identity.
    pub mask: Option<Vec<F>>,
}

impl<F: Scalar> Dropout<F> {
    pub fn backward(&self, grad: &Tensor<F>) -> Tensor<F> {
        match &self.mask {
            None => grad.clone(),
            Some(mask) => {
                let mut g = grad.clone();
                for (v, &m) in g.values_mut().iter_mut().zip(mask) {
                    *v *= m;
                }
                g
            }
        }
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` during
/// training; identity at inference or with `rate == 0`.
pub fn dropout<F: Scalar, R: Rng + ?Sized>(
    input: &Tensor<F>,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Dropout<F> {
    assert!(
        (0.0..1.0).contains(&rate),
        "dropout rate {rate} outside [0, 1)"
    );
    if !training || rate == 0.0 {
        return Dropout {
            output: input.clone(),
            mask: None,
        };
    }
    let keep = F::lit(1.0 / (1.0 - rate));
    let mask: Vec<F> = (0..input.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                F::zero()
            } else {
                keep
            }
        })
        .collect();
    let mut output = input.clone();
    for (v, &m) in output.values_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Dropout {
        output,
        mask: Some(mask),
    }
}
