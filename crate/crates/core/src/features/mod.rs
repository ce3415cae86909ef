//! Log mel-filterbank spectrogram images.
//!
//! 32 log mel energies every 10 ms, stacked 32 frames at a time into
//! 32×32 images covering 320 ms each.

mod image;
mod mel;
mod stft;

pub use image::{
    read_features, stack_images, write_features, ImageSequence, NormStats, SpectrogramImage,
    IMAGE_BANDS, IMAGE_FRAMES, IMAGE_PIXELS,
};
pub use mel::{hz_to_mel, log_mel, mel_filterbank, mel_to_hz, MelFilterbank};
pub use stft::{frame_signal, hann_periodic, stft_magnitude};

use crate::audio_io::{resample, AudioBuffer};
use crate::error::Result;

/// Front-end settings. Defaults: 25 ms Hann window, 10 ms step, 512-point
/// FFT at 16 kHz, 32 bands over 0-8 kHz, natural log with a 1e-10 floor.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    pub window_s: f64,
    pub step_s: f64,
    pub fft_size: usize,
    pub num_bands: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub log_floor: f64,
    pub hop_images: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: crate::WORKING_RATE_HZ,
            window_s: 0.025,
            step_s: crate::FRAME_STEP_S,
            fft_size: 512,
            num_bands: IMAGE_BANDS,
            fmin_hz: 0.0,
            fmax_hz: 8000.0,
            log_floor: 1e-10,
            hop_images: 1,
        }
    }
}

/// Precomputed filterbank plus settings; reusable across recordings.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    filterbank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        let filterbank = mel_filterbank(
            config.num_bands,
            config.fft_size,
            config.sample_rate_hz,
            config.fmin_hz,
            config.fmax_hz,
        )?;
        Ok(Self { config, filterbank })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.filterbank
    }

    /// Log mel energies, one row per 10 ms frame.
    pub fn log_mel_frames(&self, buf: &AudioBuffer) -> Result<Vec<Vec<f64>>> {
        let buf = resample(buf, self.config.sample_rate_hz)?;
        let frames = frame_signal(&buf, self.config.window_s, self.config.step_s)?;
        if frames.is_empty() {
            return Ok(Vec::new());
        }
        let spectra = stft_magnitude(&frames, self.config.fft_size)?;
        log_mel(&spectra, &self.filterbank, self.config.log_floor)
    }

    pub fn extract(&self, buf: &AudioBuffer) -> Result<ImageSequence> {
        let mel = self.log_mel_frames(buf)?;
        stack_images(&mel, self.config.hop_images, self.config.step_s)
    }
}

/// Runs the default front end on `buf`.
pub fn extract_features(buf: &AudioBuffer) -> Result<ImageSequence> {
    FeatureExtractor::new(FeatureConfig::default())?.extract(buf)
}
