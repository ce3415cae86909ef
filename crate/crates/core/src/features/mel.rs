use crate::error::{Result, VadError};

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with unit peaks, equally spaced on the mel scale.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    /// `num_bands` rows of `fft_size / 2 + 1` weights.
    pub weights: Vec<Vec<f64>>,
    pub band_centers_hz: Vec<f64>,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl MelFilterbank {
    pub fn num_bands(&self) -> usize {
        self.weights.len()
    }

    pub fn num_bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }
}

/// Band `b` is the triangle over mel edges `b, b+1, b+2` of `num_bands + 2`
/// equally spaced edges from `fmin_hz` to `fmax_hz`, evaluated at FFT bin
/// center frequencies.
pub fn mel_filterbank(
    num_bands: usize,
    fft_size: usize,
    sample_rate_hz: u32,
    fmin_hz: f64,
    fmax_hz: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate_hz as f64 / 2.0;
    if num_bands == 0 || fft_size < 2 {
        return Err(VadError::config(
            "need at least one band and an fft size >= 2",
        ));
    }
    if !(0.0 <= fmin_hz && fmin_hz < fmax_hz && fmax_hz <= nyquist) {
        return Err(VadError::config(format!(
            "need 0 <= fmin < fmax <= {nyquist} Hz, got [{fmin_hz}, {fmax_hz}]"
        )));
    }
    let (mel_lo, mel_hi) = (hz_to_mel(fmin_hz), hz_to_mel(fmax_hz));
    let spacing = (mel_hi - mel_lo) / (num_bands + 1) as f64;
    let edges_hz: Vec<f64> = (0..num_bands + 2)
        .map(|i| mel_to_hz(mel_lo + spacing * i as f64))
        .collect();

    let num_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate_hz as f64 / fft_size as f64;
    let weights = (0..num_bands)
        .map(|b| {
            let (lo, center, hi) = (edges_hz[b], edges_hz[b + 1], edges_hz[b + 2]);
            (0..num_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= center {
                        (f - lo) / (center - lo)
                    } else {
                        (hi - f) / (hi - center)
                    }
                })
                .collect()
        })
        .collect();

    Ok(MelFilterbank {
        weights,
        band_centers_hz: edges_hz[1..=num_bands].to_vec(),
        fmin_hz,
        fmax_hz,
    })
}

/// `ln(max(Σ_k w[b][k]·|X[t][k]|, floor))` for every frame and band.
pub fn log_mel(spectra: &[Vec<f64>], fb: &MelFilterbank, floor: f64) -> Result<Vec<Vec<f64>>> {
    if floor.is_nan() || floor <= 0.0 {
        return Err(VadError::config("log floor must be positive"));
    }
    let bins = fb.num_bins();
    spectra
        .iter()
        .enumerate()
        .map(|(t, row)| {
            if row.len() != bins {
                return Err(VadError::shape(format!(
                    "spectrum frame {t} has {} bins, filterbank expects {bins}",
                    row.len()
                )));
            }
            Ok(fb
                .weights
                .iter()
                .map(|w| {
                    let e: f64 = w.iter().zip(row).map(|(a, b)| a * b).sum();
                    e.max(floor).ln()
                })
                .collect())
        })
        .collect()
}
