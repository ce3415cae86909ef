//! Central finite-difference checks, one function per layer. Each takes a
//! seed and returns the worst relative error over every checked component.

use rand::Rng;
use vadkit::model::{build_model, sequence_gradients, ModelConfig, ModelParams};
use vadkit::nn::{
    bce_loss, conv2d_valid, conv2d_valid_backward, dense, dense_backward, dropout,
    lstm_sequence_backward, lstm_sequence_forward, maxpool2x2, maxpool2x2_backward, softmax,
    Activation, LstmParams, Tensor,
};

use super::{activation_pattern, normal_tensor, rng, FdStats, FD_STEP};

fn dot(a: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
    a.values().iter().zip(w.values()).map(|(x, y)| x * y).sum()
}

/// Central difference of `f` with respect to `t[j]`.
fn central(t: &mut Tensor<f64>, j: usize, mut f: impl FnMut(&Tensor<f64>) -> f64) -> f64 {
    let orig = t.values()[j];
    t.values_mut()[j] = orig + FD_STEP;
    let up = f(t);
    t.values_mut()[j] = orig - FD_STEP;
    let down = f(t);
    t.values_mut()[j] = orig;
    (up - down) / (2.0 * FD_STEP)
}

pub fn conv(seed: u64) -> FdStats {
    let mut r = rng(seed);
    let (h, w) = (r.random_range(3..=8), r.random_range(3..=8));
    let (kh, kw) = (r.random_range(1..=h.min(4)), r.random_range(1..=w.min(4)));
    let (cin, cout) = (r.random_range(1..=3), r.random_range(1..=3));
    let mut x = normal_tensor(&mut r, &[h, w, cin], 1.0);
    let mut k = normal_tensor(&mut r, &[kh, kw, cin, cout], 0.5);
    let mut b = normal_tensor(&mut r, &[cout], 0.5);
    let wts = normal_tensor(&mut r, &[h - kh + 1, w - kw + 1, cout], 1.0);
    let g = conv2d_valid_backward(&x, &k, &wts, true).unwrap();
    let gx = g.input.unwrap();
    let mut s = FdStats::default();
    for j in 0..x.len() {
        let (kk, bb) = (k.clone(), b.clone());
        let n = central(&mut x, j, |x| {
            dot(&conv2d_valid(x, &kk, &bb).unwrap(), &wts)
        });
        s.record(0, gx.values()[j], n);
    }
    for j in 0..k.len() {
        let (xx, bb) = (x.clone(), b.clone());
        let n = central(&mut k, j, |k| {
            dot(&conv2d_valid(&xx, k, &bb).unwrap(), &wts)
        });
        s.record(1, g.kernels.values()[j], n);
    }
    for j in 0..b.len() {
        let (xx, kk) = (x.clone(), k.clone());
        let n = central(&mut b, j, |b| {
            dot(&conv2d_valid(&xx, &kk, b).unwrap(), &wts)
        });
        s.record(2, g.bias.values()[j], n);
    }
    s.finish()
}

pub fn pool(seed: u64) -> FdStats {
    let mut r = rng(seed);
    let (h, w, c) = (
        2 * r.random_range(1..=4),
        2 * r.random_range(1..=4),
        r.random_range(1..=3),
    );
    let mut x = normal_tensor(&mut r, &[h, w, c], 1.0);
    let fwd = maxpool2x2(&x).unwrap();
    let wts = normal_tensor(&mut r, fwd.output.dims(), 1.0);
    let gx = maxpool2x2_backward(&wts, &fwd.argmax, x.dims()).unwrap();
    let mut s = FdStats::default();
    for j in 0..x.len() {
        let base = fwd.argmax.clone();
        let mut kink = false;
        let n = central(&mut x, j, |x| {
            let p = maxpool2x2(x).unwrap();
            kink |= p.argmax != base;
            dot(&p.output, &wts)
        });
        if kink {
            s.skipped_kinks += 1;
        } else {
            s.record(0, gx.values()[j], n);
        }
    }
    s.finish()
}

pub fn dense_layer(seed: u64) -> FdStats {
    let mut r = rng(seed);
    let (n_in, n_out) = (r.random_range(1..=12), r.random_range(1..=8));
    let act = if seed.is_multiple_of(2) {
        Activation::Relu
    } else {
        Activation::None
    };
    let mut x = normal_tensor(&mut r, &[n_in], 1.0);
    let mut wm = normal_tensor(&mut r, &[n_in, n_out], 0.5);
    let mut b = normal_tensor(&mut r, &[n_out], 0.5);
    let wts = normal_tensor(&mut r, &[n_out], 1.0);
    let out = dense(&x, &wm, &b, act).unwrap();
    let g = dense_backward(&x, &wm, &out, &wts, act).unwrap();
    let pattern = |x: &Tensor<f64>, wm: &Tensor<f64>, b: &Tensor<f64>| -> Vec<bool> {
        dense(x, wm, b, Activation::None)
            .unwrap()
            .values()
            .iter()
            .map(|&v| v > 0.0)
            .collect()
    };
    let base = pattern(&x, &wm, &b);
    let relu = matches!(act, Activation::Relu);
    let mut s = FdStats::default();
    let check = |s: &mut FdStats,
                 analytic: f64,
                 which: usize,
                 t: &mut Tensor<f64>,
                 j: usize,
                 other: [&Tensor<f64>; 2]| {
        let mut kink = false;
        let n = central(t, j, |t| {
            let (xx, ww, bb) = match which {
                0 => (t, other[0], other[1]),
                1 => (other[0], t, other[1]),
                _ => (other[0], other[1], t),
            };
            kink |= relu && pattern(xx, ww, bb) != base;
            dot(&dense(xx, ww, bb, act).unwrap(), &wts)
        });
        if kink {
            s.skipped_kinks += 1;
        } else {
            s.record(which, analytic, n);
        }
    };
    for j in 0..x.len() {
        let (ww, bb) = (wm.clone(), b.clone());
        check(&mut s, g.input.values()[j], 0, &mut x, j, [&ww, &bb]);
    }
    for j in 0..wm.len() {
        let (xx, bb) = (x.clone(), b.clone());
        check(&mut s, g.weights.values()[j], 1, &mut wm, j, [&xx, &bb]);
    }
    for j in 0..b.len() {
        let (xx, ww) = (x.clone(), wm.clone());
        check(&mut s, g.bias.values()[j], 2, &mut b, j, [&xx, &ww]);
    }
    s.finish()
}

pub fn lstm(seed: u64) -> FdStats {
    let mut r = rng(seed);
    let (n, m, t_len) = (
        r.random_range(1..=4),
        r.random_range(1..=4),
        r.random_range(1..=6),
    );
    let reverse = seed % 2 == 1;
    let params = LstmParams::new(
        normal_tensor(&mut r, &[n, 4 * m], 0.5),
        normal_tensor(&mut r, &[m, 4 * m], 0.5),
        normal_tensor(&mut r, &[4 * m], 0.5),
    )
    .unwrap();
    let xs: Vec<Vec<f64>> = (0..t_len)
        .map(|_| normal_tensor(&mut r, &[n], 1.0).into_values())
        .collect();
    let wts: Vec<Vec<f64>> = (0..t_len)
        .map(|_| normal_tensor(&mut r, &[m], 1.0).into_values())
        .collect();
    let loss = |p: &LstmParams<f64>, xs: &[Vec<f64>]| -> f64 {
        let tr = lstm_sequence_forward(p, xs, reverse).unwrap();
        tr.outputs()
            .iter()
            .zip(&wts)
            .map(|(h, w)| h.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let trace = lstm_sequence_forward(&params, &xs, reverse).unwrap();
    let (g, dx) = lstm_sequence_backward(&params, &trace, &wts).unwrap();
    let mut s = FdStats::default();
    for (which, analytic) in [(0, &g.w), (1, &g.u), (2, &g.b)] {
        for j in 0..analytic.len() {
            let mut p = params.clone();
            let t = match which {
                0 => &mut p.w,
                1 => &mut p.u,
                _ => &mut p.b,
            };
            let orig = t.values()[j];
            t.values_mut()[j] = orig + FD_STEP;
            let up = loss(&p, &xs);
            let t = match which {
                0 => &mut p.w,
                1 => &mut p.u,
                _ => &mut p.b,
            };
            t.values_mut()[j] = orig - FD_STEP;
            let down = loss(&p, &xs);
            s.record(which, analytic.values()[j], (up - down) / (2.0 * FD_STEP));
        }
    }
    for t in 0..t_len {
        for i in 0..n {
            let mut xu = xs.clone();
            xu[t][i] += FD_STEP;
            let mut xd = xs.clone();
            xd[t][i] -= FD_STEP;
            s.record(
                3,
                dx[t][i],
                (loss(&params, &xu) - loss(&params, &xd)) / (2.0 * FD_STEP),
            );
        }
    }
    s.finish()
}

pub fn softmax_bce(seed: u64) -> FdStats {
    let mut r = rng(seed);
    let mut z = normal_tensor(&mut r, &[2], 2.0);
    let target = r.random_range(0..2usize);
    let (_, g) = bce_loss(&softmax(&z), target);
    let mut s = FdStats::default();
    for j in 0..2 {
        let n = central(&mut z, j, |z| bce_loss(&softmax(z), target).0);
        s.record(0, g.values()[j], n);
    }
    s.finish()
}

pub fn dropout_layer(seed: u64) -> FdStats {
    let mut r = rng(seed);
    let len = r.random_range(1..=16);
    let rate = r.random_range(0.1..0.7);
    let mut x = normal_tensor(&mut r, &[len], 1.0);
    let wts = normal_tensor(&mut r, &[len], 1.0);
    let fwd = dropout(&x, rate, &mut rng(seed ^ 0xd0), true);
    let gx = fwd.backward(&wts);
    let mut s = FdStats::default();
    for j in 0..len {
        let n = central(&mut x, j, |x| {
            dot(&dropout(x, rate, &mut rng(seed ^ 0xd0), true).output, &wts)
        });
        s.record(0, gx.values()[j], n);
    }
    s.finish()
}

/// Whole network, dropout active with a fixed mask. `per_tensor` caps the
/// components checked per parameter tensor (`None` checks all).
pub fn full_model(
    seed: u64,
    config: &ModelConfig,
    seq_len: usize,
    per_tensor: Option<usize>,
) -> FdStats {
    let mut r = rng(seed);
    let mut params: ModelParams<f64> = build_model(config, seed).unwrap();
    // Non-zero biases so relus are exercised away from the all-zero start.
    for t in params.tensors_mut() {
        if t.dims().len() == 1 {
            for v in t.values_mut() {
                *v += 0.1 * r.random_range(-1.0..1.0);
            }
        }
    }
    let (h, w) = (config.input_height, config.input_width);
    let inputs: Vec<Tensor<f64>> = (0..seq_len)
        .map(|_| normal_tensor(&mut r, &[h, w, 1], 1.0))
        .collect();
    let targets: Vec<usize> = (0..seq_len).map(|_| r.random_range(0..2)).collect();
    let rate = 0.3;
    let drop_seed = seed ^ 0xfeed;
    let loss = |p: &ModelParams<f64>| {
        sequence_gradients(p, &inputs, &targets, rate, &mut rng(drop_seed))
            .unwrap()
            .loss_sum
    };
    let grads = sequence_gradients(&params, &inputs, &targets, rate, &mut rng(drop_seed))
        .unwrap()
        .grads;
    let base = activation_pattern(&params, &inputs);
    let mut s = FdStats::default();
    for k in 0..grads.tensors.len() {
        let len = grads.tensors[k].len();
        let picks: Vec<usize> = match per_tensor {
            Some(c) if c < len => (0..c).map(|_| r.random_range(0..len)).collect(),
            _ => (0..len).collect(),
        };
        for j in picks {
            let orig = params.tensors()[k].values()[j];
            let mut kink = false;
            let mut eval_at = |v: f64, params: &mut ModelParams<f64>| {
                params.tensors_mut()[k].values_mut()[j] = v;
                kink |= activation_pattern(params, &inputs) != base;
                loss(params)
            };
            let up = eval_at(orig + FD_STEP, &mut params);
            let down = eval_at(orig - FD_STEP, &mut params);
            params.tensors_mut()[k].values_mut()[j] = orig;
            if kink {
                s.skipped_kinks += 1;
            } else {
                s.record(
                    k,
                    grads.tensors[k].values()[j],
                    (up - down) / (2.0 * FD_STEP),
                );
            }
        }
    }
    s.finish()
}
