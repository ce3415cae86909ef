//! Audio and ground-truth label ingestion.
//!
//! Audio is read from RIFF/WAVE (PCM16 or float32), mixed down to mono and
//! resampled to the 16 kHz working rate. Labels arrive as timed condition
//! segments and are rasterized to the 10 ms scoring grid.

mod labels;
mod resample;
mod wav;

pub use labels::{
    load_labels, parse_labels, rasterize_labels, save_labels, Condition, FrameLabels, LabelTrack,
    Segment,
};
pub use resample::resample;
pub use wav::{read_wav, read_wav_bytes, write_wav, WavEncoding};

use crate::error::{Result, VadError};

/// Mono audio with its sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(VadError::Argument("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(VadError::Argument(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Reads a WAV file and resamples it to `target_hz`.
pub fn load_audio(path: impl AsRef<std::path::Path>, target_hz: u32) -> Result<AudioBuffer> {
    let buf = read_wav(path)?;
    resample(&buf, target_hz)
}
