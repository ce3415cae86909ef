use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VadError};

pub const IMAGE_FRAMES: usize = 32;
pub const IMAGE_BANDS: usize = 32;
pub const IMAGE_PIXELS: usize = IMAGE_FRAMES * IMAGE_BANDS;

const FEATURE_MAGIC: &[u8; 4] = b"VFEA";
const FEATURE_VERSION: u32 = 1;

/// 32 consecutive frames × 32 mel bands, row-major by frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrogramImage {
    pub pixels: Vec<f32>,
    pub start_time_s: f64,
}

impl SpectrogramImage {
    pub fn new(pixels: Vec<f32>, start_time_s: f64) -> Result<Self> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(VadError::shape(format!(
                "image has {} pixels, expected {IMAGE_PIXELS}",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(VadError::shape("image contains non-finite pixels"));
        }
        Ok(Self {
            pixels,
            start_time_s,
        })
    }

    #[inline]
    pub fn at(&self, frame: usize, band: usize) -> f32 {
        self.pixels[frame * IMAGE_BANDS + band]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageSequence {
    pub images: Vec<SpectrogramImage>,
    pub hop_images: usize,
}

impl ImageSequence {
    pub fn new(images: Vec<SpectrogramImage>, hop_images: usize) -> Self {
        Self { images, hop_images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Mel frames between consecutive image starts.
    pub fn frames_per_step(&self) -> usize {
        IMAGE_FRAMES * self.hop_images
    }

    pub fn slice(&self, start: usize, len: usize) -> ImageSequence {
        ImageSequence {
            images: self.images[start..start + len].to_vec(),
            hop_images: self.hop_images,
        }
    }
}

/// Cuts a mel matrix into 32-frame images. Image `j` starts at frame
/// `32·hop·j`; rows that cannot fill a whole image are dropped.
pub fn stack_images(
    mel: &[Vec<f64>],
    hop_images: usize,
    frame_step_s: f64,
) -> Result<ImageSequence> {
    if hop_images == 0 {
        return Err(VadError::Argument("image hop must be positive".into()));
    }
    if let Some(t) = mel.iter().position(|r| r.len() != IMAGE_BANDS) {
        return Err(VadError::shape(format!(
            "mel frame {t} has {} bands, expected {IMAGE_BANDS}",
            mel[t].len()
        )));
    }
    let stride = IMAGE_FRAMES * hop_images;
    let mut images = Vec::new();
    let mut start = 0;
    while start + IMAGE_FRAMES <= mel.len() {
        let pixels = mel[start..start + IMAGE_FRAMES]
            .iter()
            .flat_map(|row| row.iter().map(|&v| v as f32))
            .collect();
        images.push(SpectrogramImage::new(pixels, start as f64 * frame_step_s)?);
        start += stride;
    }
    Ok(ImageSequence::new(images, hop_images))
}

/// Per-band mean and standard deviation over training images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl NormStats {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; IMAGE_BANDS],
            std: vec![1.0; IMAGE_BANDS],
        }
    }

    /// Population statistics over every pixel of every image, per band.
    pub fn compute<'a>(images: impl IntoIterator<Item = &'a SpectrogramImage>) -> Result<Self> {
        let mut sum = [0.0f64; IMAGE_BANDS];
        let mut sq = [0.0f64; IMAGE_BANDS];
        let mut count = 0usize;
        for img in images {
            for f in 0..IMAGE_FRAMES {
                for b in 0..IMAGE_BANDS {
                    let v = img.at(f, b) as f64;
                    sum[b] += v;
                    sq[b] += v * v;
                }
            }
            count += IMAGE_FRAMES;
        }
        if count == 0 {
            return Err(VadError::Argument(
                "no images to compute statistics from".into(),
            ));
        }
        let n = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| ((s / n - m * m).max(0.0)).sqrt() as f32)
            .collect();
        Ok(Self {
            mean: mean.into_iter().map(|m| m as f32).collect(),
            std,
        })
    }

    /// `(pixel - mean[b]) / std[b]`; zero std is replaced by 1.
    pub fn apply(&self, seq: &ImageSequence) -> ImageSequence {
        let std: Vec<f32> = self
            .std
            .iter()
            .enumerate()
            .map(|(b, &s)| {
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    log::warn!("band {b} has zero std; using 1.0");
                    1.0
                }
            })
            .collect();
        let images = seq
            .images
            .iter()
            .map(|img| {
                let pixels = img
                    .pixels
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| {
                        let b = i % IMAGE_BANDS;
                        (p - self.mean[b]) / std[b]
                    })
                    .collect();
                SpectrogramImage {
                    pixels,
                    start_time_s: img.start_time_s,
                }
            })
            .collect();
        ImageSequence::new(images, seq.hop_images)
    }
}

/// Writes the `VFEA` feature file.
pub fn write_features(seq: &ImageSequence, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + seq.len() * IMAGE_PIXELS * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.hop_images as u32).to_le_bytes());
    for img in &seq.images {
        for p in &img.pixels {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<ImageSequence> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[..4] != FEATURE_MAGIC {
        return Err(VadError::Format("not a VFEA feature file".into()));
    }
    let word =
        |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let version = word(4);
    if version != FEATURE_VERSION {
        return Err(VadError::Format(format!(
            "feature file version {version} unsupported (supported: {FEATURE_VERSION})"
        )));
    }
    let count = word(8) as usize;
    let hop = word(12) as usize;
    if hop == 0 {
        return Err(VadError::Corruption("feature file has zero hop".into()));
    }
    let expected = 16 + count * IMAGE_PIXELS * 4;
    if bytes.len() != expected {
        return Err(VadError::Corruption(format!(
            "feature file holds {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let step = IMAGE_FRAMES as f64 * hop as f64 * crate::FRAME_STEP_S;
    let images = (0..count)
        .map(|j| {
            let base = 16 + j * IMAGE_PIXELS * 4;
            let pixels = (0..IMAGE_PIXELS)
                .map(|i| {
                    let at = base + 4 * i;
                    f32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
                })
                .collect();
            SpectrogramImage::new(pixels, step * j as f64)
                .map_err(|e| VadError::Corruption(format!("image {j}: {e}")))
        })
        .collect::<Result<_>>()?;
    Ok(ImageSequence::new(images, hop))
}
