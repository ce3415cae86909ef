use super::Tensor;
use crate::error::{Result, VadError};
use crate::scalar::Scalar;

/// One LSTM direction. Gate blocks within the `4m` axis are (i, f, g, o).
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<F> {
    /// Input weights, `n × 4m`.
    pub w: Tensor<F>,
    /// Recurrent weights, `m × 4m`.
    pub u: Tensor<F>,
    /// Bias, `4m`.
    pub b: Tensor<F>,
}

impl<F: Scalar> LstmParams<F> {
    pub fn new(w: Tensor<F>, u: Tensor<F>, b: Tensor<F>) -> Result<Self> {
        w.expect_rank("lstm W", 2)?;
        let four_m = w.dims()[1];
        if !four_m.is_multiple_of(4) {
            return Err(VadError::shape(format!(
                "lstm W width {four_m} is not a multiple of 4"
            )));
        }
        let m = four_m / 4;
        u.expect_dims("lstm U", &[m, four_m])?;
        b.expect_dims("lstm b", &[four_m])?;
        Ok(Self { w, u, b })
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            w: Tensor::zeros(&[input_size, 4 * hidden_size]),
            u: Tensor::zeros(&[hidden_size, 4 * hidden_size]),
            b: Tensor::zeros(&[4 * hidden_size]),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.dims()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.u.dims()[0]
    }

    pub fn add_assign(&mut self, other: &LstmParams<F>) {
        self.w.add_assign(&other.w);
        self.u.add_assign(&other.u);
        self.b.add_assign(&other.b);
    }
}

#[inline]
fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Activations of one step, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct LstmStepCache<F> {
    pub x: Vec<F>,
    pub h_prev: Vec<F>,
    pub c_prev: Vec<F>,
    pub i: Vec<F>,
    pub f: Vec<F>,
    pub g: Vec<F>,
    pub o: Vec<F>,
    pub c: Vec<F>,
    pub tanh_c: Vec<F>,
    pub h: Vec<F>,
}

fn step<F: Scalar>(p: &LstmParams<F>, x: &[F], h_prev: &[F], c_prev: &[F]) -> LstmStepCache<F> {
    let m = p.hidden_size();
    let four = 4 * m;
    let mut z = p.b.values().to_vec();
    let w = p.w.values();
    for (k, &xv) in x.iter().enumerate() {
        if xv == F::zero() {
            continue;
        }
        for (zj, &wv) in z.iter_mut().zip(&w[k * four..(k + 1) * four]) {
            *zj += xv * wv;
        }
    }
    let u = p.u.values();
    for (k, &hv) in h_prev.iter().enumerate() {
        if hv == F::zero() {
            continue;
        }
        for (zj, &uv) in z.iter_mut().zip(&u[k * four..(k + 1) * four]) {
            *zj += hv * uv;
        }
    }
    let i: Vec<F> = z[..m].iter().map(|&v| sigmoid(v)).collect();
    let f: Vec<F> = z[m..2 * m].iter().map(|&v| sigmoid(v)).collect();
    let g: Vec<F> = z[2 * m..3 * m].iter().map(|&v| v.tanh()).collect();
    let o: Vec<F> = z[3 * m..].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<F> = (0..m).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
    let tanh_c: Vec<F> = c.iter().map(|v| v.tanh()).collect();
    let h = (0..m).map(|j| o[j] * tanh_c[j]).collect();
    LstmStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    }
}

/// One LSTM step: returns `(h, c)`.
pub fn lstm_cell_step<F: Scalar>(
    x: &Tensor<F>,
    h_prev: &Tensor<F>,
    c_prev: &Tensor<F>,
    params: &LstmParams<F>,
) -> Result<(Tensor<F>, Tensor<F>)> {
    let (n, m) = (params.input_size(), params.hidden_size());
    if x.len() != n || h_prev.len() != m || c_prev.len() != m {
        return Err(VadError::shape(format!(
            "lstm step expects x[{n}], h[{m}], c[{m}]; got x[{}], h[{}], c[{}]",
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let s = step(params, x.values(), h_prev.values(), c_prev.values());
    Ok((Tensor::from_vec(s.h), Tensor::from_vec(s.c)))
}

/// A unidirectional pass over a sequence.
#[derive(Clone, Debug)]
pub struct LstmTrace<F> {
    pub reverse: bool,
    /// Caches in processing order (reversed time when `reverse`).
    pub steps: Vec<LstmStepCache<F>>,
}

impl<F: Scalar> LstmTrace<F> {
    /// Hidden states indexed by original time.
    pub fn outputs(&self) -> Vec<&[F]> {
        let mut hs: Vec<&[F]> = self.steps.iter().map(|s| s.h.as_slice()).collect();
        if self.reverse {
            hs.reverse();
        }
        hs
    }
}

/// Runs from zero state over `seq` (or over its reversal).
pub fn lstm_sequence_forward<F: Scalar>(
    params: &LstmParams<F>,
    seq: &[Vec<F>],
    reverse: bool,
) -> Result<LstmTrace<F>> {
    let (n, m) = (params.input_size(), params.hidden_size());
    if let Some(t) = seq.iter().position(|x| x.len() != n) {
        return Err(VadError::shape(format!(
            "lstm input at t={t} has {} features, expected {n}",
            seq[t].len()
        )));
    }
    let mut h = vec![F::zero(); m];
    let mut c = vec![F::zero(); m];
    let mut steps = Vec::with_capacity(seq.len());
    let order: Box<dyn Iterator<Item = &Vec<F>>> = if reverse {
        Box::new(seq.iter().rev())
    } else {
        Box::new(seq.iter())
    };
    for x in order {
        let s = step(params, x, &h, &c);
        h.clone_from(&s.h);
        c.clone_from(&s.c);
        steps.push(s);
    }
    Ok(LstmTrace { reverse, steps })
}

/// Backpropagation through time. `grad_h[t]` is the loss gradient w.r.t.
/// the hidden output at original time `t`. Returns parameter gradients and
/// input gradients (original time order).
pub fn lstm_sequence_backward<F: Scalar>(
    params: &LstmParams<F>,
    trace: &LstmTrace<F>,
    grad_h: &[Vec<F>],
) -> Result<(LstmParams<F>, Vec<Vec<F>>)> {
    let (n, m) = (params.input_size(), params.hidden_size());
    let t_len = trace.steps.len();
    if grad_h.len() != t_len || grad_h.iter().any(|g| g.len() != m) {
        return Err(VadError::shape(
            "lstm backward: gradient sequence does not match trace",
        ));
    }
    let four = 4 * m;
    let mut grads = LstmParams::zeros(n, m);
    let mut dx_proc = vec![vec![F::zero(); n]; t_len];
    let mut dh_next = vec![F::zero(); m];
    let mut dc_next = vec![F::zero(); m];
    let w = params.w.values();
    let u = params.u.values();
    let mut dz = vec![F::zero(); four];

    for k in (0..t_len).rev() {
        let s = &trace.steps[k];
        let time = if trace.reverse { t_len - 1 - k } else { k };
        for j in 0..m {
            let dh = grad_h[time][j] + dh_next[j];
            let d_o = dh * s.tanh_c[j];
            let dc = dc_next[j] + dh * s.o[j] * (F::one() - s.tanh_c[j] * s.tanh_c[j]);
            let di = dc * s.g[j];
            let dg = dc * s.i[j];
            let df = dc * s.c_prev[j];
            dc_next[j] = dc * s.f[j];
            dz[j] = di * s.i[j] * (F::one() - s.i[j]);
            dz[m + j] = df * s.f[j] * (F::one() - s.f[j]);
            dz[2 * m + j] = dg * (F::one() - s.g[j] * s.g[j]);
            dz[3 * m + j] = d_o * s.o[j] * (F::one() - s.o[j]);
        }
        for (acc, &d) in grads.b.values_mut().iter_mut().zip(&dz) {
            *acc += d;
        }
        let gw = grads.w.values_mut();
        for (r, &xv) in s.x.iter().enumerate() {
            let row = &w[r * four..(r + 1) * four];
            let mut sum = F::zero();
            for (q, (acc, &d)) in gw[r * four..(r + 1) * four].iter_mut().zip(&dz).enumerate() {
                *acc += xv * d;
                sum += row[q] * d;
            }
            dx_proc[k][r] = sum;
        }
        let gu = grads.u.values_mut();
        for (r, &hv) in s.h_prev.iter().enumerate() {
            let row = &u[r * four..(r + 1) * four];
            let mut sum = F::zero();
            for (q, (acc, &d)) in gu[r * four..(r + 1) * four].iter_mut().zip(&dz).enumerate() {
                *acc += hv * d;
                sum += row[q] * d;
            }
            dh_next[r] = sum;
        }
    }
    if trace.reverse {
        dx_proc.reverse();
    }
    Ok((grads, dx_proc))
}

/// Per-timestep concatenation `[h_fwd[t], h_bwd[t]]`.
pub fn bilstm_forward<F: Scalar>(
    seq: &[Tensor<F>],
    fwd: &LstmParams<F>,
    bwd: &LstmParams<F>,
) -> Result<Vec<Tensor<F>>> {
    if seq.is_empty() {
        return Err(VadError::Argument(
            "bilstm needs a non-empty sequence".into(),
        ));
    }
    let xs: Vec<Vec<F>> = seq.iter().map(|t| t.values().to_vec()).collect();
    let f = lstm_sequence_forward(fwd, &xs, false)?;
    let b = lstm_sequence_forward(bwd, &xs, true)?;
    Ok(f.outputs()
        .into_iter()
        .zip(b.outputs())
        .map(|(hf, hb)| Tensor::from_vec(hf.iter().chain(hb).copied().collect()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_unit(bi: f64, bf: f64, bg: f64) -> LstmParams<f64> {
        let mut p = LstmParams::zeros(1, 1);
        p.b.values_mut().copy_from_slice(&[bi, bf, bg, 0.0]);
        p
    }

    fn run(p: &LstmParams<f64>, c_prev: f64) -> (f64, f64) {
        let (h, c) = lstm_cell_step(
            &Tensor::from_vec(vec![0.0]),
            &Tensor::from_vec(vec![0.0]),
            &Tensor::from_vec(vec![c_prev]),
            p,
        )
        .unwrap();
        (h.values()[0], c.values()[0])
    }

    #[test]
    fn zero_params_zero_state() {
        assert_eq!(run(&LstmParams::zeros(1, 1), 0.0), (0.0, 0.0));
    }

    #[test]
    fn saturated_input_and_candidate() {
        // i = σ(10), g = tanh(10): c = 0.99995460, h = 0.5·tanh(c) = 0.38078754.
        let (h, c) = run(&single_unit(10.0, 0.0, 10.0), 0.0);
        assert!((c - 0.999_954_598_009_177_5).abs() < 1e-12);
        assert!((h - 0.380_787_543_812_615_87).abs() < 1e-12);
    }

    #[test]
    fn forget_gate_carries_cell() {
        // f = σ(10): c = 2·σ(10) = 1.99990920.
        let (_, c) = run(&single_unit(0.0, 10.0, 0.0), 2.0);
        assert!((c - 1.999_909_204_262_595_2).abs() < 1e-12);
    }

    fn random_params(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LstmParams<f64> {
        let mut p = LstmParams::zeros(n, m);
        for t in [&mut p.w, &mut p.u, &mut p.b] {
            t.values_mut()
                .iter_mut()
                .for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        p
    }

    #[test]
    fn bilstm_matches_unrolled_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, m) = (3, 2);
        let fwd = random_params(&mut rng, n, m);
        let bwd = random_params(&mut rng, n, m);
        let seq: Vec<Tensor<f64>> = (0..3)
            .map(|_| Tensor::from_vec((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let out = bilstm_forward(&seq, &fwd, &bwd).unwrap();

        let zero = Tensor::from_vec(vec![0.0; m]);
        let mut hf = Vec::new();
        let (mut h, mut c) = (zero.clone(), zero.clone());
        for x in &seq {
            (h, c) = lstm_cell_step(x, &h, &c, &fwd).unwrap();
            hf.push(h.clone());
        }
        let mut hb = vec![zero.clone(); 3];
        let (mut h, mut c) = (zero.clone(), zero);
        for t in (0..3).rev() {
            (h, c) = lstm_cell_step(&seq[t], &h, &c, &bwd).unwrap();
            hb[t] = h.clone();
        }
        for t in 0..3 {
            let expect: Vec<f64> = hf[t]
                .values()
                .iter()
                .chain(hb[t].values())
                .copied()
                .collect();
            for (a, e) in out[t].values().iter().zip(&expect) {
                assert!((a - e).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn single_step_is_both_directions_on_same_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fwd = random_params(&mut rng, 2, 3);
        let bwd = random_params(&mut rng, 2, 3);
        let x = Tensor::from_vec(vec![0.3, -0.7]);
        let out = bilstm_forward(std::slice::from_ref(&x), &fwd, &bwd).unwrap();
        let z = Tensor::from_vec(vec![0.0; 3]);
        let (hf, _) = lstm_cell_step(&x, &z, &z, &fwd).unwrap();
        let (hb, _) = lstm_cell_step(&x, &z, &z, &bwd).unwrap();
        assert_eq!(&out[0].values()[..3], hf.values());
        assert_eq!(&out[0].values()[3..], hb.values());
    }

    #[test]
    fn palindrome_with_shared_params_is_time_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_params(&mut rng, 2, 2);
        let a = Tensor::from_vec(vec![0.5, -0.1]);
        let b = Tensor::from_vec(vec![-0.9, 0.4]);
        let seq = vec![a.clone(), b.clone(), a.clone(), b, a];
        let out = bilstm_forward(&seq, &p, &p).unwrap();
        let t_len = out.len();
        for t in 0..t_len {
            let mirror = &out[t_len - 1 - t];
            assert_eq!(&out[t].values()[..2], &mirror.values()[2..]);
            assert_eq!(&out[t].values()[2..], &mirror.values()[..2]);
        }
    }

    #[test]
    fn empty_sequence_rejected() {
        let p = LstmParams::<f64>::zeros(1, 1);
        assert!(matches!(
            bilstm_forward(&[], &p, &p),
            Err(VadError::Argument(_))
        ));
    }
}
