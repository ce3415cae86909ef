use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio_io::AudioBuffer;
use crate::error::{Result, VadError};

/// Splits `buf` into overlapping analysis windows without padding.
///
/// Frame `i` starts at sample `i * round(step_s * rate)`. A signal shorter
/// than one window yields no frames.
pub fn frame_signal(buf: &AudioBuffer, window_s: f64, step_s: f64) -> Result<Vec<Vec<f64>>> {
    if step_s.is_nan() || step_s <= 0.0 || window_s < step_s {
        return Err(VadError::config(format!(
            "need window >= step > 0, got window {window_s} s, step {step_s} s"
        )));
    }
    let rate = buf.sample_rate_hz() as f64;
    let window = (window_s * rate).round() as usize;
    let step = (step_s * rate).round() as usize;
    if step == 0 {
        return Err(VadError::config("step is shorter than one sample"));
    }
    let x = buf.samples();
    if x.len() < window {
        return Ok(Vec::new());
    }
    let count = 1 + (x.len() - window) / step;
    Ok((0..count)
        .map(|i| x[i * step..i * step + window].to_vec())
        .collect())
}

/// Periodic Hann window: `0.5 - 0.5 cos(2πn/N)`.
pub fn hann_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Hann-windowed, zero-padded FFT magnitudes for bins `0..=fft_size/2`.
pub fn stft_magnitude(frames: &[Vec<f64>], fft_size: usize) -> Result<Vec<Vec<f64>>> {
    if fft_size == 0 || !fft_size.is_power_of_two() {
        return Err(VadError::config(format!(
            "fft size {fft_size} is not a power of two"
        )));
    }
    let Some(first) = frames.first() else {
        return Ok(Vec::new());
    };
    let window_len = first.len();
    if fft_size < window_len {
        return Err(VadError::config(format!(
            "fft size {fft_size} is shorter than the {window_len}-sample window"
        )));
    }
    if let Some(bad) = frames.iter().position(|f| f.len() != window_len) {
        return Err(VadError::shape(format!(
            "frame {bad} length differs from frame 0"
        )));
    }

    let window = hann_periodic(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut out = Vec::with_capacity(frames.len());
    for frame in frames {
        for (dst, (&x, &w)) in buf.iter_mut().zip(frame.iter().zip(&window)) {
            *dst = Complex::new(x * w, 0.0);
        }
        for dst in &mut buf[window_len..] {
            *dst = Complex::new(0.0, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.push(buf[..=fft_size / 2].iter().map(|c| c.norm()).collect());
    }
    Ok(out)
}
