//! Seeded weight initializers.

use rand::Rng;
use rand_distr::StandardNormal;

use super::Tensor;
use crate::scalar::Scalar;

/// Uniform on `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<F: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    dims: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Tensor<F> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = dims.iter().product();
    let values = (0..n)
        .map(|_| F::lit(rng.random_range(-limit..limit)))
        .collect();
    Tensor::new(dims.to_vec(), values).expect("dims product matches")
}

/// A `rows × cols` matrix with orthonormal rows (or columns, when
/// `rows > cols`), from Gram-Schmidt on a Gaussian draw.
pub fn orthogonal<F: Scalar, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor<F> {
    let transpose = rows > cols;
    let (r, c) = if transpose {
        (cols, rows)
    } else {
        (rows, cols)
    };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(r);
    while basis.len() < r {
        let mut v: Vec<f64> = (0..c).map(|_| rng.sample(StandardNormal)).collect();
        // Two passes of modified Gram-Schmidt for stability.
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut values = vec![F::zero(); rows * cols];
    for (i, row) in basis.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            let (ri, cj) = if transpose { (j, i) } else { (i, j) };
            values[ri * cols + cj] = F::lit(x);
        }
    }
    Tensor::new(vec![rows, cols], values).expect("dims product matches")
}
