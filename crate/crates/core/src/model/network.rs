use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ModelGrads, ModelParams};
use crate::error::{Result, VadError};
use crate::features::{ImageSequence, SpectrogramImage, IMAGE_BANDS, IMAGE_FRAMES};
use crate::nn::{
    bce_loss, conv2d_valid, conv2d_valid_backward, dense, dense_backward, dropout,
    lstm_sequence_backward, lstm_sequence_forward, maxpool2x2, maxpool2x2_backward, relu,
    relu_backward, softmax, Activation, Dropout, LstmTrace, Pooled, Tensor,
};
use crate::scalar::Scalar;

pub const CLASS_NON_SPEECH: usize = 0;
pub const CLASS_SPEECH: usize = 1;

/// Speech posterior for one image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub p_speech: f64,
    pub image_index: usize,
}

/// `32 × 32 × 1` network input (frames × bands × channel).
pub fn image_tensor<F: Scalar>(img: &SpectrogramImage) -> Tensor<F> {
    let values = img.pixels.iter().map(|&p| F::lit(p as f64)).collect();
    Tensor::new(vec![IMAGE_FRAMES, IMAGE_BANDS, 1], values).expect("image is 32×32")
}

struct ImageCache<F> {
    input: Tensor<F>,
    conv1: Tensor<F>,
    pool1: Pooled<F>,
    conv2: Tensor<F>,
    pool2: Pooled<F>,
    dense: Tensor<F>,
    drop: Dropout<F>,
}

struct SeqCache<F> {
    images: Vec<ImageCache<F>>,
    fwd: LstmTrace<F>,
    bwd: Option<LstmTrace<F>>,
    rnn_drop: Vec<Dropout<F>>,
    logits: Vec<Tensor<F>>,
    probs: Vec<Tensor<F>>,
}

fn image_forward<F: Scalar, R: Rng + ?Sized>(
    p: &ModelParams<F>,
    input: &Tensor<F>,
    rate: f64,
    rng: &mut R,
) -> Result<ImageCache<F>> {
    let conv1 = relu(&conv2d_valid(input, &p.conv1_w, &p.conv1_b)?);
    let pool1 = maxpool2x2(&conv1)?;
    let conv2 = relu(&conv2d_valid(&pool1.output, &p.conv2_w, &p.conv2_b)?);
    let pool2 = maxpool2x2(&conv2)?;
    let dense = dense(&pool2.output, &p.dense_w, &p.dense_b, Activation::Relu)?;
    let drop = dropout(&dense, rate, rng, rate > 0.0);
    Ok(ImageCache {
        input: input.clone(),
        conv1,
        pool1,
        conv2,
        pool2,
        dense,
        drop,
    })
}

fn run<F: Scalar, R: Rng + ?Sized>(
    p: &ModelParams<F>,
    inputs: &[Tensor<F>],
    rate: f64,
    rng: &mut R,
) -> Result<SeqCache<F>> {
    if inputs.is_empty() {
        return Err(VadError::Argument(
            "forward needs at least one image".into(),
        ));
    }
    let expect = [p.config.input_height, p.config.input_width, 1];
    for (t, x) in inputs.iter().enumerate() {
        x.expect_dims(&format!("input image {t}"), &expect)?;
    }
    let images = inputs
        .iter()
        .map(|x| image_forward(p, x, rate, rng))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<Vec<F>> = images
        .iter()
        .map(|c| c.drop.output.values().to_vec())
        .collect();
    let fwd = lstm_sequence_forward(&p.lstm_fwd, &xs, false)?;
    let bwd = match &p.lstm_bwd {
        Some(b) => Some(lstm_sequence_forward(b, &xs, true)?),
        None => None,
    };
    let hf = fwd.outputs();
    let hb = bwd.as_ref().map(|b| b.outputs());
    let mut rnn_drop = Vec::with_capacity(inputs.len());
    let mut logits = Vec::with_capacity(inputs.len());
    let mut probs = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        let mut h = hf[t].to_vec();
        if let Some(hb) = &hb {
            h.extend_from_slice(hb[t]);
        }
        let d = dropout(&Tensor::from_vec(h), rate, rng, rate > 0.0);
        let l = dense(&d.output, &p.out_w, &p.out_b, Activation::None)?;
        probs.push(softmax(&l));
        logits.push(l);
        rnn_drop.push(d);
    }
    Ok(SeqCache {
        images,
        fwd,
        bwd,
        rnn_drop,
        logits,
        probs,
    })
}

fn backward<F: Scalar>(
    p: &ModelParams<F>,
    cache: &SeqCache<F>,
    targets: &[usize],
) -> Result<(f64, ModelGrads<F>)> {
    let t_len = cache.probs.len();
    let m = p.config.lstm_width;
    let mut loss = 0.0;
    let mut g_out_w = p.out_w.zeros_like();
    let mut g_out_b = p.out_b.zeros_like();
    let mut dh_f = Vec::with_capacity(t_len);
    let mut dh_b = Vec::with_capacity(t_len);
    for (t, &target) in targets.iter().enumerate() {
        let (l, gl) = bce_loss(&cache.probs[t], target);
        loss += l.as_f64();
        let g = dense_backward(
            &cache.rnn_drop[t].output,
            &p.out_w,
            &cache.logits[t],
            &gl,
            Activation::None,
        )?;
        g_out_w.add_assign(&g.weights);
        g_out_b.add_assign(&g.bias);
        let dh = cache.rnn_drop[t].backward(&g.input);
        dh_f.push(dh.values()[..m].to_vec());
        if p.lstm_bwd.is_some() {
            dh_b.push(dh.values()[m..].to_vec());
        }
    }

    let (g_fwd, mut dx) = lstm_sequence_backward(&p.lstm_fwd, &cache.fwd, &dh_f)?;
    let g_bwd = match (&p.lstm_bwd, &cache.bwd) {
        (Some(params), Some(trace)) => {
            let (g, dxb) = lstm_sequence_backward(params, trace, &dh_b)?;
            for (a, b) in dx.iter_mut().zip(&dxb) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += *y);
            }
            Some(g)
        }
        _ => None,
    };

    let mut g_conv1_w = p.conv1_w.zeros_like();
    let mut g_conv1_b = p.conv1_b.zeros_like();
    let mut g_conv2_w = p.conv2_w.zeros_like();
    let mut g_conv2_b = p.conv2_b.zeros_like();
    let mut g_dense_w = p.dense_w.zeros_like();
    let mut g_dense_b = p.dense_b.zeros_like();
    for (c, d) in cache.images.iter().zip(dx) {
        let d_dense = c.drop.backward(&Tensor::from_vec(d));
        let gd = dense_backward(
            &c.pool2.output,
            &p.dense_w,
            &c.dense,
            &d_dense,
            Activation::Relu,
        )?;
        g_dense_w.add_assign(&gd.weights);
        g_dense_b.add_assign(&gd.bias);
        let d_conv2 = maxpool2x2_backward(&gd.input, &c.pool2.argmax, c.conv2.dims())?;
        let d_conv2 = relu_backward(&d_conv2, &c.conv2);
        let g2 = conv2d_valid_backward(&c.pool1.output, &p.conv2_w, &d_conv2, true)?;
        g_conv2_w.add_assign(&g2.kernels);
        g_conv2_b.add_assign(&g2.bias);
        let d_pool1 = g2.input.expect("requested");
        let d_conv1 = maxpool2x2_backward(&d_pool1, &c.pool1.argmax, c.conv1.dims())?;
        let d_conv1 = relu_backward(&d_conv1, &c.conv1);
        let g1 = conv2d_valid_backward(&c.input, &p.conv1_w, &d_conv1, false)?;
        g_conv1_w.add_assign(&g1.kernels);
        g_conv1_b.add_assign(&g1.bias);
    }

    let mut tensors = vec![
        g_conv1_w, g_conv1_b, g_conv2_w, g_conv2_b, g_dense_w, g_dense_b, g_fwd.w, g_fwd.u, g_fwd.b,
    ];
    if let Some(g) = g_bwd {
        tensors.extend([g.w, g.u, g.b]);
    }
    tensors.extend([g_out_w, g_out_b]);
    Ok((loss, ModelGrads { tensors }))
}

/// Loss and gradients for one sequence.
#[derive(Clone, Debug)]
pub struct SequenceGrads<F> {
    /// Sum of per-timestep cross-entropy.
    pub loss_sum: f64,
    /// Timesteps whose thresholded posterior matched the target.
    pub correct: usize,
    pub grads: ModelGrads<F>,
}

/// Forward and backward over already-normalized inputs. `targets[t]` is
/// 1 for speech. Dropout uses `dropout_rate` and `rng`.
pub fn sequence_gradients<F: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<F>,
    inputs: &[Tensor<F>],
    targets: &[usize],
    dropout_rate: f64,
    rng: &mut R,
) -> Result<SequenceGrads<F>> {
    if targets.len() != inputs.len() || targets.iter().any(|&t| t > 1) {
        return Err(VadError::Argument(
            "need one binary target per input image".into(),
        ));
    }
    let cache = run(params, inputs, dropout_rate, rng)?;
    let correct = cache
        .probs
        .iter()
        .zip(targets)
        .filter(|(p, &t)| usize::from(p.values()[CLASS_SPEECH] > F::lit(0.5)) == t)
        .count();
    let (loss_sum, grads) = backward(params, &cache, targets)?;
    Ok(SequenceGrads {
        loss_sum,
        correct,
        grads,
    })
}

/// Inference-mode summed cross-entropy over already-normalized inputs.
pub fn sequence_loss<F: Scalar>(
    params: &ModelParams<F>,
    inputs: &[Tensor<F>],
    targets: &[usize],
) -> Result<f64> {
    let cache = run(
        params,
        inputs,
        0.0,
        &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
    )?;
    Ok(cache
        .probs
        .iter()
        .zip(targets)
        .map(|(p, &t)| bce_loss(p, t).0.as_f64())
        .sum())
}

/// Inference-mode softmax outputs `[p_non_speech, p_speech]` per input.
pub fn sequence_posteriors<F: Scalar>(
    params: &ModelParams<F>,
    inputs: &[Tensor<F>],
) -> Result<Vec<Tensor<F>>> {
    Ok(run(
        params,
        inputs,
        0.0,
        &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0),
    )?
    .probs)
}

/// Runs the network over raw images, normalizing them with the model's
/// stored statistics. Dropout is active only when `training` is set.
pub fn forward<F: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<F>,
    seq: &ImageSequence,
    training: bool,
    rng: &mut R,
) -> Result<Vec<Posterior>> {
    if seq.is_empty() {
        return Err(VadError::Argument(
            "forward needs a non-empty image sequence".into(),
        ));
    }
    let normalized;
    let seq = match &params.norm {
        Some(stats) => {
            normalized = stats.apply(seq);
            &normalized
        }
        None => seq,
    };
    let inputs: Vec<Tensor<F>> = seq.images.iter().map(image_tensor).collect();
    let rate = if training {
        params.config.dropout_rate as f64
    } else {
        0.0
    };
    let cache = run(params, &inputs, rate, rng)?;
    Ok(cache
        .probs
        .iter()
        .enumerate()
        .map(|(image_index, p)| Posterior {
            p_speech: p.values()[CLASS_SPEECH].as_f64(),
            image_index,
        })
        .collect())
}
