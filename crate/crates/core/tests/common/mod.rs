//! Shared fixtures for integration tests: toy corpora, finite-difference
//! helpers and activation-pattern tracking for kink detection.
#![allow(dead_code)]

pub mod gradcheck;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vadkit::audio_io::{rasterize_labels, AudioBuffer, Condition, LabelTrack, Segment};
use vadkit::features::{extract_features, ImageSequence, SpectrogramImage, IMAGE_PIXELS};
use vadkit::model::{ModelConfig, ModelParams};
use vadkit::nn::{conv2d_valid, dense, maxpool2x2, Activation, Tensor};
use vadkit::training::{make_examples, TrainingExample};

pub const FD_STEP: f64 = 1e-3;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Below this magnitude gradients are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_tensor(rng: &mut ChaCha8Rng, dims: &[usize], scale: f64) -> Tensor<f64> {
    let n = dims.iter().product();
    let values = (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Tensor::new(dims.to_vec(), values).unwrap()
}

/// Conv 3×3/4, conv 3×3/8, dense 16, BiLSTM 8.
pub fn toy_config() -> ModelConfig {
    ModelConfig {
        conv1_kernel: [3, 3],
        conv1_width: 4,
        conv2_kernel: [3, 3],
        conv2_width: 8,
        dense_width: 16,
        lstm_width: 8,
        bidirectional: true,
        dropout_rate: 0.0,
        input_height: 32,
        input_width: 32,
    }
}

/// Relu masks and pool argmaxes of every image, used to tell whether a
/// finite-difference step crossed a kink.
pub fn activation_pattern(p: &ModelParams<f64>, inputs: &[Tensor<f64>]) -> Vec<Vec<usize>> {
    let mask = |t: &Tensor<f64>| {
        t.values()
            .iter()
            .map(|&v| usize::from(v > 0.0))
            .collect::<Vec<_>>()
    };
    let relu = |t: &Tensor<f64>| t.map(|v| v.max(0.0));
    let mut out = Vec::new();
    for x in inputs {
        let c1 = conv2d_valid(x, &p.conv1_w, &p.conv1_b).unwrap();
        out.push(mask(&c1));
        let p1 = maxpool2x2(&relu(&c1)).unwrap();
        out.push(p1.argmax.clone());
        let c2 = conv2d_valid(&p1.output, &p.conv2_w, &p.conv2_b).unwrap();
        out.push(mask(&c2));
        let p2 = maxpool2x2(&relu(&c2)).unwrap();
        out.push(p2.argmax.clone());
        out.push(mask(
            &dense(&p2.output, &p.dense_w, &p.dense_b, Activation::None).unwrap(),
        ));
    }
    out
}

/// Outcome of comparing analytic and central-difference gradients.
///
/// The pass metric is the per-tensor relative error
/// `‖a − n‖₂ / max(‖a‖₂, ‖n‖₂)`, computed per instance and maximized over
/// tensors and instances. The worst elementwise error is kept as a
/// diagnostic: at a 1e-3 step it is dominated by O(h²) truncation on
/// components that are themselves tiny.
#[derive(Debug, Default)]
pub struct FdStats {
    pub checked: usize,
    pub skipped_kinks: usize,
    pub worst_tensor: f64,
    pub worst_element: f64,
    open: std::collections::BTreeMap<usize, [f64; 3]>,
}

impl FdStats {
    /// Adds one component of tensor `group`.
    pub fn record(&mut self, group: usize, analytic: f64, numeric: f64) {
        self.checked += 1;
        self.worst_element = self.worst_element.max(rel_err(analytic, numeric));
        let acc = self.open.entry(group).or_insert([0.0; 3]);
        acc[0] += (analytic - numeric).powi(2);
        acc[1] += analytic * analytic;
        acc[2] += numeric * numeric;
    }

    /// Closes the current instance, folding its tensors into `worst_tensor`.
    pub fn finish(mut self) -> Self {
        for [d, a, n] in std::mem::take(&mut self.open).into_values() {
            let scale = a.sqrt().max(n.sqrt());
            let err = if scale > 0.0 { d.sqrt() / scale } else { 0.0 };
            self.worst_tensor = self.worst_tensor.max(err);
        }
        self
    }

    pub fn merge(&mut self, o: &FdStats) {
        assert!(o.open.is_empty(), "merge finished stats only");
        self.checked += o.checked;
        self.skipped_kinks += o.skipped_kinks;
        self.worst_tensor = self.worst_tensor.max(o.worst_tensor);
        self.worst_element = self.worst_element.max(o.worst_element);
    }
}

/// Audio for a run of 320 ms slots: harmonic tone bursts for speech and
/// white noise otherwise, each at a random level, plus a short tail so the
/// last slot fills a whole image.
pub fn toy_audio(rng: &mut ChaCha8Rng, speech: &[bool]) -> Vec<f64> {
    let slot = 5120;
    let tail = 480;
    let mut out = Vec::with_capacity(speech.len() * slot + tail);
    for (k, &s) in speech.iter().enumerate() {
        let len = if k + 1 == speech.len() {
            slot + tail
        } else {
            slot
        };
        if s {
            let f0 = rng.random_range(150.0..400.0);
            let amp = rng.random_range(0.05..0.5);
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            for i in 0..len {
                let t = i as f64 / 16_000.0;
                let v: f64 = (1..=4)
                    .map(|h| (2.0 * PI * f0 * h as f64 * t + phase * h as f64).sin() / h as f64)
                    .sum();
                out.push(amp * 0.5 * v);
            }
        } else {
            let amp = rng.random_range(0.02..0.3);
            out.extend((0..len).map(|_| amp * rng.random_range(-1.0..1.0)));
        }
    }
    out
}

pub fn slot_track(speech: &[bool]) -> LabelTrack {
    let segs = speech
        .iter()
        .enumerate()
        .map(|(k, &s)| Segment {
            start_s: 0.32 * k as f64,
            end_s: 0.32 * (k + 1) as f64 + if k + 1 == speech.len() { 0.03 } else { 0.0 },
            condition: if s {
                Condition::CleanSpeech
            } else {
                Condition::NoSpeech
            },
        })
        .collect();
    LabelTrack::new(segs).unwrap()
}

pub fn random_slots(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

/// One toy recording of `n` slots: audio, features and its label track.
pub fn toy_recording(rng: &mut ChaCha8Rng, n: usize) -> (AudioBuffer, ImageSequence, LabelTrack) {
    let slots = random_slots(rng, n);
    let buf = AudioBuffer::new(toy_audio(rng, &slots), 16_000).unwrap();
    let seq = extract_features(&buf).unwrap();
    (buf, seq, slot_track(&slots))
}

/// `count` toy sequences of `seq_len` images, each from its own recording.
pub fn toy_examples(seed: u64, count: usize, seq_len: usize) -> Vec<TrainingExample> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let (buf, seq, track) = toy_recording(&mut r, seq_len);
            let frames = rasterize_labels(&track, buf.duration_s(), 0.01).unwrap();
            let mut ex = make_examples(&seq, &frames, seq_len).unwrap();
            assert_eq!(ex.len(), 1);
            ex.remove(0)
        })
        .collect()
}

/// Striped 32×32 image: horizontal stripes for class 1, vertical for 0.
pub fn stripe_image(rng: &mut ChaCha8Rng, class: u8, t: usize) -> SpectrogramImage {
    let period = rng.random_range(3..7);
    let phase = rng.random_range(0..period);
    let px = (0..IMAGE_PIXELS)
        .map(|i| {
            let (row, col) = (i / 32, i % 32);
            let k = if class == 1 { row } else { col };
            let base = if (k + phase) % (2 * period) < period {
                1.0
            } else {
                -1.0
            };
            base + 0.5 * rng.sample::<f64, _>(StandardNormal)
        })
        .map(|v| v as f32)
        .collect();
    SpectrogramImage::new(px, 0.32 * t as f64).unwrap()
}

/// Sequences where image `t`'s target is the class of image `t + 1` (the
/// last image is followed by an unseen class-0 image).
pub fn right_context_examples(seed: u64, count: usize, seq_len: usize) -> Vec<TrainingExample> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let classes: Vec<u8> = (0..seq_len).map(|_| r.random_range(0..2u8)).collect();
            let images = classes
                .iter()
                .enumerate()
                .map(|(t, &c)| stripe_image(&mut r, c, t))
                .collect();
            let targets = (0..seq_len)
                .map(|t| classes.get(t + 1).copied().unwrap_or(0))
                .collect();
            TrainingExample::new(ImageSequence::new(images, 1), targets).unwrap()
        })
        .collect()
}
