use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audio_io::{AudioBuffer, FrameLabels};
use crate::error::{Result, VadError};
use crate::features::{ImageSequence, IMAGE_FRAMES};
use crate::model::{forward, ModelParams};
use crate::scalar::Scalar;
use crate::FRAME_STEP_S;

/// Speech scores on a regular frame grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTrack {
    pub frame_step_s: f64,
    pub scores: Vec<f64>,
}

impl ScoreTrack {
    pub fn new(scores: Vec<f64>, frame_step_s: f64) -> Result<Self> {
        if let Some(i) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
            return Err(VadError::Validation(format!(
                "score {i} = {} outside [0, 1]",
                scores[i]
            )));
        }
        Ok(Self {
            frame_step_s,
            scores,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Spreads one score per image over `frames_per_image` frames each, up to
/// `num_frames`; frames past the last image take its score.
pub fn expand_scores(
    image_scores: &[f64],
    frames_per_image: usize,
    num_frames: usize,
) -> Result<Vec<f64>> {
    if image_scores.is_empty() || frames_per_image == 0 {
        return Err(VadError::Argument(
            "need at least one image score and a positive frame count".into(),
        ));
    }
    Ok((0..num_frames)
        .map(|f| image_scores[(f / frames_per_image).min(image_scores.len() - 1)])
        .collect())
}

/// Inference-mode posteriors expanded to `num_frames` 10 ms frames.
pub fn score_frames<F: Scalar>(
    params: &ModelParams<F>,
    seq: &ImageSequence,
    num_frames: usize,
) -> Result<ScoreTrack> {
    if seq.is_empty() {
        return Err(VadError::Argument(
            "cannot score an empty image sequence".into(),
        ));
    }
    let post = forward(params, seq, false, &mut ChaCha8Rng::seed_from_u64(0))?;
    let scores: Vec<f64> = post.iter().map(|p| p.p_speech.clamp(0.0, 1.0)).collect();
    ScoreTrack::new(
        expand_scores(&scores, seq.frames_per_step(), num_frames)?,
        FRAME_STEP_S,
    )
}

/// Scores matched to the label track's length: a short track is padded
/// with its last score and a long one truncated. A mismatch of more than
/// one image is an alignment error.
pub fn align_scores(track: &ScoreTrack, frames: &FrameLabels) -> Result<Vec<f64>> {
    let (have, want) = (track.len(), frames.len());
    if have.abs_diff(want) > IMAGE_FRAMES || track.is_empty() {
        return Err(VadError::Alignment(format!(
            "{have} score frames against {want} label frames"
        )));
    }
    let last = track.scores[have - 1];
    Ok((0..want)
        .map(|i| track.scores.get(i).copied().unwrap_or(last))
        .collect())
}

/// Per-frame log RMS energy, min-max normalized over the track. Silent or
/// constant-energy audio scores 0 everywhere.
pub fn energy_baseline(buf: &AudioBuffer) -> Result<ScoreTrack> {
    if buf.is_empty() {
        return Err(VadError::Argument(
            "energy baseline needs non-empty audio".into(),
        ));
    }
    let step = (buf.sample_rate_hz() as f64 * FRAME_STEP_S).round() as usize;
    let n = (buf.duration_s() / FRAME_STEP_S + 1e-9).floor() as usize;
    let s = buf.samples();
    let energy: Vec<f64> = (0..n)
        .map(|i| {
            let frame = &s[(i * step).min(s.len())..((i + 1) * step).min(s.len())];
            let ms = frame.iter().map(|v| v * v).sum::<f64>() / frame.len().max(1) as f64;
            ms.sqrt().max(1e-10).ln()
        })
        .collect();
    let lo = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scores = if hi - lo > 1e-9 {
        energy.iter().map(|e| (e - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; n]
    };
    ScoreTrack::new(scores, FRAME_STEP_S)
}

/// Writes `frame_index,time_s,p_speech` rows.
pub fn write_scores(track: &ScoreTrack, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from("frame_index,time_s,p_speech\n");
    for (i, p) in track.scores.iter().enumerate() {
        writeln!(s, "{i},{:.2},{p}", i as f64 * track.frame_step_s).expect("string write");
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<ScoreTrack> {
    let text = fs::read_to_string(path)?;
    let mut scores = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "frame_index,time_s,p_speech" => {}
        _ => {
            return Err(VadError::Format(
                "scores CSV must start with frame_index,time_s,p_speech".into(),
            ))
        }
    }
    for (row, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| VadError::Parse {
            row: row + 1,
            message,
        };
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 fields, got {}",
                fields.len()
            )));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(format!("frame_index: {e}")))?;
        if index != scores.len() {
            return Err(parse_err(format!("frame_index {index} out of sequence")));
        }
        let p: f64 = fields[2]
            .parse()
            .map_err(|e| parse_err(format!("p_speech: {e}")))?;
        scores.push(p);
    }
    ScoreTrack::new(scores, FRAME_STEP_S)
}
