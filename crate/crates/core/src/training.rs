//! Training examples, the Adam training loop and accuracy.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::FrameLabels;
use crate::error::{Result, VadError};
use crate::features::{ImageSequence, NormStats, IMAGE_FRAMES};
use crate::model::{
    build_model, image_tensor, sequence_gradients, sequence_posteriors, ModelConfig, ModelGrads,
    ModelParams, CLASS_SPEECH,
};
use crate::nn::{adam_step, AdamState, Tensor};
use crate::scalar::Scalar;

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Images per training sequence.
    pub seq_len: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub dropout_rate: f32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            seq_len: 8,
            epochs: 20,
            learning_rate: 1e-3,
            seed: 0,
            dropout_rate: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.seq_len == 0 || self.epochs == 0 {
            return Err(VadError::Config(
                "batch_size, seq_len and epochs must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(VadError::Config(format!(
                "learning_rate {} is not a finite non-negative number",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(VadError::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let tc: Self = serde_json::from_str(text)?;
        tc.validate()?;
        Ok(tc)
    }
}

/// A run of consecutive images with one binary target (1 = speech) each.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub images: ImageSequence,
    pub targets: Vec<u8>,
}

impl TrainingExample {
    pub fn new(images: ImageSequence, targets: Vec<u8>) -> Result<Self> {
        if images.len() != targets.len() || images.is_empty() {
            return Err(VadError::Argument(format!(
                "example needs one target per image, got {} images and {} targets",
                images.len(),
                targets.len()
            )));
        }
        if targets.iter().any(|&t| t > 1) {
            return Err(VadError::Argument("targets must be 0 or 1".into()));
        }
        Ok(Self { images, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Image-level targets: 1 when at least half of the image's 32 frames are
/// speech. Frames missing at the end of a short label track count as
/// non-speech; a shortfall or surplus of more than one image is an
/// alignment error.
pub fn image_targets(seq: &ImageSequence, frames: &FrameLabels) -> Result<Vec<u8>> {
    let step = seq.frames_per_step();
    let covered = if seq.is_empty() {
        0
    } else {
        (seq.len() - 1) * step + IMAGE_FRAMES
    };
    let have = frames.len();
    // A surplus below one image is the remainder stack_images drops; one
    // more image of slack absorbs window-length rounding.
    if have + IMAGE_FRAMES < covered || have > covered + step + IMAGE_FRAMES {
        return Err(VadError::Alignment(format!(
            "labels cover {have} frames but features imply {covered}"
        )));
    }
    Ok((0..seq.len())
        .map(|j| {
            let start = j * step;
            let speech = (start..start + IMAGE_FRAMES)
                .filter(|&f| frames.speech_mask.get(f).copied().unwrap_or(false))
                .count();
            u8::from(2 * speech >= IMAGE_FRAMES)
        })
        .collect())
}

/// Cuts a labelled image sequence into non-overlapping examples of
/// `seq_len` images, dropping the trailing partial run.
pub fn make_examples(
    seq: &ImageSequence,
    frames: &FrameLabels,
    seq_len: usize,
) -> Result<Vec<TrainingExample>> {
    if seq_len == 0 {
        return Err(VadError::Argument("seq_len must be positive".into()));
    }
    let targets = image_targets(seq, frames)?;
    (0..seq.len() / seq_len)
        .map(|k| {
            let start = k * seq_len;
            TrainingExample::new(
                seq.slice(start, seq_len),
                targets[start..start + seq_len].to_vec(),
            )
        })
        .collect()
}

/// One epoch of [`TrainHistory`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-timestep cross-entropy over the epoch's batches.
    pub train_loss: f64,
    /// Inference-mode accuracy on the training set after the epoch.
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Validation accuracy of the returned snapshot, if validation ran.
    pub fn best_val_acc(&self) -> Option<f64> {
        self.epochs.get(self.best_epoch.checked_sub(1)?)?.val_acc
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,val_acc\n");
        for e in &self.epochs {
            let val = e.val_acc.map(|v| v.to_string()).unwrap_or_default();
            writeln!(s, "{},{},{},{}", e.epoch, e.train_loss, e.train_acc, val)
                .expect("string write");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Deterministically mixes a base seed with context words (splitmix64).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

struct Prepared<F> {
    inputs: Vec<Tensor<F>>,
    targets: Vec<usize>,
}

fn prepare<F: Scalar>(examples: &[TrainingExample], norm: &NormStats) -> Vec<Prepared<F>> {
    examples
        .par_iter()
        .map(|ex| Prepared {
            inputs: norm
                .apply(&ex.images)
                .images
                .iter()
                .map(image_tensor)
                .collect(),
            targets: ex.targets.iter().map(|&t| t as usize).collect(),
        })
        .collect()
}

fn prepared_accuracy<F: Scalar>(params: &ModelParams<F>, data: &[Prepared<F>]) -> Result<f64> {
    let counts = data
        .par_iter()
        .map(|p| {
            let post = sequence_posteriors(params, &p.inputs)?;
            Ok(post
                .iter()
                .zip(&p.targets)
                .filter(|(q, &t)| usize::from(q.values()[CLASS_SPEECH] > F::lit(0.5)) == t)
                .count())
        })
        .collect::<Result<Vec<_>>>()?;
    let total: usize = data.iter().map(|p| p.targets.len()).sum();
    Ok(counts.iter().sum::<usize>() as f64 / total as f64)
}

/// Fraction of images whose thresholded posterior (`p_speech > 0.5`)
/// matches the target, pooled over every timestep of every example.
pub fn accuracy<F: Scalar>(params: &ModelParams<F>, examples: &[TrainingExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(VadError::Argument(
            "accuracy needs at least one example".into(),
        ));
    }
    let norm = params.norm.clone().unwrap_or_else(NormStats::identity);
    prepared_accuracy(params, &prepare(examples, &norm))
}

/// Trains a freshly initialized model. Normalization statistics are fitted
/// on `examples` and stored in the returned model. When `val_examples` is
/// non-empty the parameters of the best-validation epoch (earliest on
/// ties) are returned, otherwise those after the last epoch.
///
/// `tc.dropout_rate` overrides the rate in `model_config`.
pub fn train<F: Scalar>(
    examples: &[TrainingExample],
    model_config: &ModelConfig,
    tc: &TrainConfig,
    val_examples: &[TrainingExample],
) -> Result<(ModelParams<F>, TrainHistory)> {
    if examples.is_empty() {
        return Err(VadError::Argument(
            "training needs at least one example".into(),
        ));
    }
    tc.validate()?;
    let config = ModelConfig {
        dropout_rate: tc.dropout_rate,
        ..model_config.clone()
    };
    config.validate()?;
    let norm = NormStats::compute(examples.iter().flat_map(|e| e.images.images.iter()))?;
    let mut params: ModelParams<F> = build_model(&config, derive_seed(tc.seed, &[0]))?;
    params.norm = Some(norm.clone());

    let train_data = prepare::<F>(examples, &norm);
    let val_data = prepare::<F>(val_examples, &norm);
    let mut adam = AdamState::new(params.tensors(), F::lit(tc.learning_rate));
    let names = params.tensor_names();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(tc.seed, &[1]));
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelParams<F>)> = None;
    let rate = tc.dropout_rate as f64;

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut steps_total = 0usize;
        for (b, batch) in order.chunks(tc.batch_size).enumerate() {
            let per_example = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        tc.seed,
                        &[2, epoch as u64, i as u64],
                    ));
                    let d = &train_data[i];
                    sequence_gradients(&params, &d.inputs, &d.targets, rate, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let steps: usize = batch.iter().map(|&i| train_data[i].targets.len()).sum();
            let mut grads = ModelGrads::zeros_like(&params);
            let mut batch_loss = 0.0;
            for g in &per_example {
                grads.add_assign(&g.grads);
                batch_loss += g.loss_sum;
            }
            let mean_loss = batch_loss / steps as f64;
            if !mean_loss.is_finite() {
                return Err(VadError::Training(format!(
                    "training diverged: non-finite loss at epoch {epoch}, batch {}",
                    b + 1
                )));
            }
            grads.scale(F::lit(1.0 / steps as f64));
            let mut tensors = params.tensors_mut();
            adam_step(&mut tensors, &grads.tensors, &names, &mut adam)
                .map_err(|e| VadError::Training(format!("epoch {epoch}, batch {}: {e}", b + 1)))?;
            loss_sum += batch_loss;
            steps_total += steps;
        }
        let train_acc = prepared_accuracy(&params, &train_data)?;
        let val_acc = if val_data.is_empty() {
            None
        } else {
            Some(prepared_accuracy(&params, &val_data)?)
        };
        let train_loss = loss_sum / steps_total as f64;
        log::debug!(
            "epoch {epoch}: loss {train_loss:.5} train_acc {train_acc:.4} val_acc {val_acc:?}"
        );
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_acc,
        });
        if let Some(v) = val_acc {
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, params.clone()));
                history.best_epoch = epoch;
            }
        }
    }
    match best {
        Some((_, snapshot)) => Ok((snapshot, history)),
        None => {
            history.best_epoch = tc.epochs;
            Ok((params, history))
        }
    }
}
