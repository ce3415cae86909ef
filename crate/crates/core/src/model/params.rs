use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::Result;
use crate::features::NormStats;
use crate::nn::init::{glorot_uniform, orthogonal};
use crate::nn::{LstmParams, Tensor};
use crate::scalar::Scalar;

/// All trainable tensors plus the input normalization fitted on training data.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    pub config: ModelConfig,
    pub conv1_w: Tensor<F>,
    pub conv1_b: Tensor<F>,
    pub conv2_w: Tensor<F>,
    pub conv2_b: Tensor<F>,
    pub dense_w: Tensor<F>,
    pub dense_b: Tensor<F>,
    pub lstm_fwd: LstmParams<F>,
    pub lstm_bwd: Option<LstmParams<F>>,
    pub out_w: Tensor<F>,
    pub out_b: Tensor<F>,
    /// Applied to raw images by [`forward`](super::forward); not trained.
    pub norm: Option<NormStats>,
}

/// Gradients in the order of [`ModelParams::tensors`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads<F> {
    pub tensors: Vec<Tensor<F>>,
}

impl<F: Scalar> ModelGrads<F> {
    pub fn zeros_like(params: &ModelParams<F>) -> Self {
        Self {
            tensors: params
                .tensors()
                .into_iter()
                .map(Tensor::zeros_like)
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads<F>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, k: F) {
        self.tensors.iter_mut().for_each(|t| t.scale(k));
    }
}

impl<F: Scalar> ModelParams<F> {
    /// Tensors in serialization order: conv1 W/b, conv2 W/b, dense W/b,
    /// lstm-fwd W/U/b, [lstm-bwd W/U/b], output W/b.
    pub fn tensors(&self) -> Vec<&Tensor<F>> {
        let mut v = vec![
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.dense_w,
            &self.dense_b,
            &self.lstm_fwd.w,
            &self.lstm_fwd.u,
            &self.lstm_fwd.b,
        ];
        if let Some(b) = &self.lstm_bwd {
            v.extend([&b.w, &b.u, &b.b]);
        }
        v.extend([&self.out_w, &self.out_b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut v = vec![
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.dense_w,
            &mut self.dense_b,
            &mut self.lstm_fwd.w,
            &mut self.lstm_fwd.u,
            &mut self.lstm_fwd.b,
        ];
        if let Some(b) = &mut self.lstm_bwd {
            v.extend([&mut b.w, &mut b.u, &mut b.b]);
        }
        v.extend([&mut self.out_w, &mut self.out_b]);
        v
    }

    pub fn tensor_names(&self) -> Vec<&'static str> {
        let mut v = vec![
            "conv1.weight",
            "conv1.bias",
            "conv2.weight",
            "conv2.bias",
            "dense.weight",
            "dense.bias",
            "lstm_fwd.input_weight",
            "lstm_fwd.recurrent_weight",
            "lstm_fwd.bias",
        ];
        if self.lstm_bwd.is_some() {
            v.extend([
                "lstm_bwd.input_weight",
                "lstm_bwd.recurrent_weight",
                "lstm_bwd.bias",
            ]);
        }
        v.extend(["output.weight", "output.bias"]);
        v
    }

    /// Dims every tensor must have under `config`, in [`tensors`](Self::tensors) order.
    pub fn expected_dims(config: &ModelConfig) -> Result<Vec<Vec<usize>>> {
        let s = config.shapes()?;
        let [k1h, k1w] = config.conv1_kernel;
        let [k2h, k2w] = config.conv2_kernel;
        let (c1, c2, d, l) = (
            config.conv1_width,
            config.conv2_width,
            config.dense_width,
            config.lstm_width,
        );
        let lstm = [vec![d, 4 * l], vec![l, 4 * l], vec![4 * l]];
        let mut dims = vec![
            vec![k1h, k1w, 1, c1],
            vec![c1],
            vec![k2h, k2w, c1, c2],
            vec![c2],
            vec![s.flat, d],
            vec![d],
        ];
        dims.extend(lstm.iter().cloned());
        if config.bidirectional {
            dims.extend(lstm.iter().cloned());
        }
        dims.push(vec![config.directions() * l, 2]);
        dims.push(vec![2]);
        Ok(dims)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        let lstm = |p: &LstmParams<F>| LstmParams {
            w: p.w.cast(),
            u: p.u.cast(),
            b: p.b.cast(),
        };
        ModelParams {
            config: self.config.clone(),
            conv1_w: self.conv1_w.cast(),
            conv1_b: self.conv1_b.cast(),
            conv2_w: self.conv2_w.cast(),
            conv2_b: self.conv2_b.cast(),
            dense_w: self.dense_w.cast(),
            dense_b: self.dense_b.cast(),
            lstm_fwd: lstm(&self.lstm_fwd),
            lstm_bwd: self.lstm_bwd.as_ref().map(lstm),
            out_w: self.out_w.cast(),
            out_b: self.out_b.cast(),
            norm: self.norm.clone(),
        }
    }

    /// Assembles parameters from tensors in [`tensors`](Self::tensors) order.
    pub fn from_tensors(
        config: ModelConfig,
        tensors: Vec<Tensor<F>>,
        norm: Option<NormStats>,
    ) -> Result<Self> {
        let expected = Self::expected_dims(&config)?;
        if tensors.len() != expected.len() {
            return Err(crate::VadError::shape(format!(
                "config needs {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for (k, (t, d)) in tensors.iter().zip(&expected).enumerate() {
            t.expect_dims(&format!("tensor {k}"), d)?;
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("count checked");
        let conv1_w = next();
        let conv1_b = next();
        let conv2_w = next();
        let conv2_b = next();
        let dense_w = next();
        let dense_b = next();
        let lstm_fwd = LstmParams::new(next(), next(), next())?;
        let lstm_bwd = if config.bidirectional {
            Some(LstmParams::new(next(), next(), next())?)
        } else {
            None
        };
        let out_w = next();
        let out_b = next();
        Ok(Self {
            config,
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            dense_w,
            dense_b,
            lstm_fwd,
            lstm_bwd,
            out_w,
            out_b,
            norm,
        })
    }
}

fn init_lstm<F: Scalar>(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> LstmParams<F> {
    let w = glorot_uniform(rng, &[input, 4 * hidden], input, 4 * hidden);
    let u = orthogonal(rng, hidden, 4 * hidden);
    let mut b = Tensor::zeros(&[4 * hidden]);
    // Forget gate starts open.
    b.values_mut()[hidden..2 * hidden]
        .iter_mut()
        .for_each(|v| *v = F::one());
    LstmParams { w, u, b }
}

/// Seeded initialization: Glorot-uniform convolution and dense weights,
/// orthogonal recurrent weights, zero biases except forget gates at 1.
pub fn build_model<F: Scalar>(config: &ModelConfig, seed: u64) -> Result<ModelParams<F>> {
    let s = config.shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [k1h, k1w] = config.conv1_kernel;
    let [k2h, k2w] = config.conv2_kernel;
    let (c1, c2, d, l) = (
        config.conv1_width,
        config.conv2_width,
        config.dense_width,
        config.lstm_width,
    );

    let conv1_w = glorot_uniform(&mut rng, &[k1h, k1w, 1, c1], k1h * k1w, k1h * k1w * c1);
    let conv2_w = glorot_uniform(
        &mut rng,
        &[k2h, k2w, c1, c2],
        k2h * k2w * c1,
        k2h * k2w * c2,
    );
    let dense_w = glorot_uniform(&mut rng, &[s.flat, d], s.flat, d);
    let lstm_fwd = init_lstm(&mut rng, d, l);
    let lstm_bwd = config.bidirectional.then(|| init_lstm(&mut rng, d, l));
    let dirs = config.directions();
    let out_w = glorot_uniform(&mut rng, &[dirs * l, 2], dirs * l, 2);

    Ok(ModelParams {
        config: config.clone(),
        conv1_w,
        conv1_b: Tensor::zeros(&[c1]),
        conv2_w,
        conv2_b: Tensor::zeros(&[c2]),
        dense_w,
        dense_b: Tensor::zeros(&[d]),
        lstm_fwd,
        lstm_bwd,
        out_w,
        out_b: Tensor::zeros(&[2]),
        norm: None,
    })
}
