use std::f64::consts::PI;

use super::AudioBuffer;
use crate::error::{Result, VadError};

/// Zero crossings of the low-pass kernel on each side.
const ZERO_CROSSINGS: f64 = 32.0;
/// Cutoff as a fraction of the lower Nyquist frequency.
const ROLLOFF: f64 = 0.945;

fn blackman(t: f64) -> f64 {
    // t in [-1, 1]
    let x = PI * (t + 1.0);
    0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Band-limited resampling with a Blackman-windowed sinc kernel.
///
/// Output length is `round(len * target / source)`, so durations agree to
/// within half an output sample. Kernel taps are renormalized per output
/// sample, which keeps DC exact up to the signal edges.
pub fn resample(buf: &AudioBuffer, target_hz: u32) -> Result<AudioBuffer> {
    if target_hz == 0 {
        return Err(VadError::Argument("target rate must be positive".into()));
    }
    let src_hz = buf.sample_rate_hz();
    if src_hz == target_hz {
        return Ok(buf.clone());
    }
    let input = buf.samples();
    let n_in = input.len() as u64;
    let n_out = ((n_in * target_hz as u64 + src_hz as u64 / 2) / src_hz as u64) as usize;

    let step = src_hz as f64 / target_hz as f64;
    // Cutoff in cycles per input sample.
    let fc = 0.5 * ROLLOFF * (target_hz as f64 / src_hz as f64).min(1.0);
    let half_width = ZERO_CROSSINGS / (2.0 * fc);

    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out {
        let x = n as f64 * step;
        let lo = (x - half_width).ceil().max(0.0) as usize;
        let hi = ((x + half_width).floor() as usize).min(input.len().saturating_sub(1));
        let mut acc = 0.0;
        let mut norm = 0.0;
        for (k, &s) in input.iter().enumerate().take(hi + 1).skip(lo) {
            let d = x - k as f64;
            let h = sinc(2.0 * fc * d) * blackman(d / half_width);
            acc += h * s;
            norm += h;
        }
        out.push(if norm.abs() > 1e-12 { acc / norm } else { 0.0 });
    }
    AudioBuffer::new(out, target_hz)
}
