use super::Tensor;
use crate::error::{Result, VadError};
use crate::scalar::Scalar;

/// Pooled map plus, for each output element, the flat input index it came from.
#[derive(Clone, Debug)]
pub struct Pooled<F> {
    pub output: Tensor<F>,
    pub argmax: Vec<usize>,
}

/// 2×2 max pooling with stride 2; an odd trailing row or column is dropped.
pub fn maxpool2x2<F: Scalar>(input: &Tensor<F>) -> Result<Pooled<F>> {
    input.expect_rank("pool input", 3)?;
    let (h, w, c) = (input.dims()[0], input.dims()[1], input.dims()[2]);
    if h < 2 || w < 2 {
        return Err(VadError::shape(format!("cannot 2×2 pool a {h}×{w} map")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let v = input.values();
    let mut out = Vec::with_capacity(oh * ow * c);
    let mut argmax = Vec::with_capacity(oh * ow * c);
    for y in 0..oh {
        for x in 0..ow {
            for ch in 0..c {
                let mut best = (2 * y * w + 2 * x) * c + ch;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * y + dy) * w + 2 * x + dx) * c + ch;
                    if v[idx] > v[best] {
                        best = idx;
                    }
                }
                out.push(v[best]);
                argmax.push(best);
            }
        }
    }
    Ok(Pooled {
        output: Tensor::new(vec![oh, ow, c], out)?,
        argmax,
    })
}

/// Routes each output gradient to the input position that won the max.
pub fn maxpool2x2_backward<F: Scalar>(
    grad_out: &Tensor<F>,
    argmax: &[usize],
    input_dims: &[usize],
) -> Result<Tensor<F>> {
    if grad_out.len() != argmax.len() {
        return Err(VadError::shape("pool gradient and argmax lengths differ"));
    }
    let mut g = Tensor::zeros(input_dims);
    let gv = g.values_mut();
    for (&idx, &d) in argmax.iter().zip(grad_out.values()) {
        gv[idx] += d;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_max() {
        let t = Tensor::new(vec![2, 2, 1], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let p = maxpool2x2(&t).unwrap();
        assert_eq!(p.output.values(), &[4.0]);
        assert_eq!(p.argmax, vec![3]);
    }

    #[test]
    fn shapes() {
        let p = maxpool2x2(&Tensor::<f32>::zeros(&[28, 28, 32])).unwrap();
        assert_eq!(p.output.dims(), &[14, 14, 32]);
        let p = maxpool2x2(&Tensor::<f32>::zeros(&[5, 5, 1])).unwrap();
        assert_eq!(p.output.dims(), &[2, 2, 1]);
    }

    #[test]
    fn backward_routes_to_argmax_only() {
        let vals: Vec<f64> = (0..5 * 5 * 2).map(|i| ((i * 17) % 23) as f64).collect();
        let t = Tensor::new(vec![5, 5, 2], vals).unwrap();
        let p = maxpool2x2(&t).unwrap();
        let g = Tensor::new(vec![2, 2, 2], (1..=8).map(|v| v as f64).collect()).unwrap();
        let gi = maxpool2x2_backward(&g, &p.argmax, t.dims()).unwrap();
        let total: f64 = gi.values().iter().sum();
        assert_eq!(total, 36.0);
        for (i, &v) in gi.values().iter().enumerate() {
            if v != 0.0 {
                assert!(p.argmax.contains(&i));
            }
        }
    }
}
