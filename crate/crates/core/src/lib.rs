//! Voice activity detection with a compact CNN-BiLSTM.
//!
//! The pipeline runs from WAV ingest through 32×32 log-mel spectrogram
//! images, a from-scratch convolutional / recurrent network trained with
//! Adam, nested k-fold hyperparameter selection, and frame-level ROC
//! scoring on a 10 ms grid.
//!
//! Numerical code in [`nn`], [`model`] and [`training`] is generic over
//! the [`Scalar`] type. Production paths use `f32`; gradient checks use
//! `f64`. The aliases below name the common instantiations.

pub mod audio_io;
pub mod crossval;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod training;

pub use error::{Result, VadError};
pub use scalar::Scalar;

/// Production tensor type.
pub type Tensor = nn::Tensor<f32>;
/// Double-precision tensor used by gradient checks.
pub type Tensor64 = nn::Tensor<f64>;
/// Production model parameters, stored as 32-bit floats on disk.
pub type Model = model::ModelParams<f32>;
/// Double-precision model, for finite-difference checks.
pub type Model64 = model::ModelParams<f64>;
/// Production optimizer state.
pub type Adam = nn::AdamState<f32>;

/// Scoring frame step used throughout: 10 ms.
pub const FRAME_STEP_S: f64 = 0.01;
/// Working sample rate; all audio is resampled to this on ingest.
pub const WORKING_RATE_HZ: u32 = 16_000;
