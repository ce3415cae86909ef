use std::fs;
use std::path::Path;

use super::AudioBuffer;
use crate::error::{Result, VadError};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Sample encoding for [`write_wav`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let bytes = fs::read(path)?;
    read_wav_bytes(&bytes)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

struct Fmt {
    tag: u16,
    channels: u16,
    rate: u32,
    bits: u16,
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(VadError::Format("missing RIFF/WAVE header".into()));
    }

    let mut fmt: Option<Fmt> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body
            .checked_add(size)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                VadError::Format(format!(
                    "chunk '{}' declares {size} bytes but only {} remain",
                    String::from_utf8_lossy(id),
                    bytes.len() - body
                ))
            })?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(VadError::Format(format!(
                        "fmt chunk too short ({size} bytes)"
                    )));
                }
                let mut tag = u16_at(bytes, body);
                if tag == FORMAT_EXTENSIBLE {
                    if size < 40 {
                        return Err(VadError::Format("extensible fmt chunk too short".into()));
                    }
                    // First two bytes of the sub-format GUID carry the real tag.
                    tag = u16_at(bytes, body + 24);
                }
                fmt = Some(Fmt {
                    tag,
                    channels: u16_at(bytes, body + 2),
                    rate: u32_at(bytes, body + 4),
                    bits: u16_at(bytes, body + 14),
                });
            }
            b"data" => data = Some(&bytes[body..end]),
            _ => {}
        }
        // Chunks are word aligned.
        pos = end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| VadError::Format("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| VadError::Format("missing data chunk".into()))?;
    if fmt.channels == 0 {
        return Err(VadError::Format("zero channels".into()));
    }
    if fmt.rate == 0 {
        return Err(VadError::Format("zero sample rate".into()));
    }

    let width = match (fmt.tag, fmt.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_FLOAT, 32) => 4,
        (tag, bits) => {
            let name = match tag {
                FORMAT_PCM => "PCM",
                FORMAT_FLOAT => "IEEE float",
                6 => "A-law",
                7 => "mu-law",
                _ => "format",
            };
            return Err(VadError::UnsupportedCodec(format!(
                "{name} (tag {tag}) with {bits} bits per sample; expected PCM16 or float32"
            )));
        }
    };

    let channels = fmt.channels as usize;
    let frame_bytes = width * channels;
    let frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(frames);
    for f in 0..frames {
        let mut acc = 0.0;
        for c in 0..channels {
            let at = f * frame_bytes + c * width;
            acc += if width == 2 {
                i16::from_le_bytes([data[at], data[at + 1]]) as f64 / 32768.0
            } else {
                f32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]]) as f64
            };
        }
        samples.push(acc / channels as f64);
    }
    AudioBuffer::new(samples, fmt.rate)
        .map_err(|e| VadError::Format(format!("invalid sample data: {e}")))
}

/// Writes a mono WAV file.
pub fn write_wav(path: impl AsRef<Path>, buf: &AudioBuffer, encoding: WavEncoding) -> Result<()> {
    let (tag, bits) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 16u16),
        WavEncoding::Float32 => (FORMAT_FLOAT, 32u16),
    };
    let width = bits as u32 / 8;
    let data_len = buf.len() as u32 * width;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buf.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(buf.sample_rate_hz() * width).to_le_bytes());
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in buf.samples() {
        match encoding {
            WavEncoding::Pcm16 => {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&v.to_le_bytes());
            }
            WavEncoding::Float32 => out.extend_from_slice(&(s as f32).to_le_bytes()),
        }
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(
        tag: u16,
        channels: u16,
        rate: u32,
        bits: u16,
        data: &[u8],
        declared: u32,
    ) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * channels as u32 * bits as u32 / 8).to_le_bytes());
        out.extend_from_slice(&(channels * bits / 8).to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&declared.to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn pcm16_full_scale_sample() {
        let bytes = header(1, 1, 8000, 16, &32767i16.to_le_bytes(), 2);
        let buf = read_wav_bytes(&bytes).unwrap();
        assert_eq!(buf.samples(), &[32767.0 / 32768.0]);
        assert_eq!(buf.sample_rate_hz(), 8000);
    }

    #[test]
    fn stereo_float_is_averaged() {
        let mut data = Vec::new();
        data.extend_from_slice(&1.0f32.to_le_bytes());
        data.extend_from_slice(&0.0f32.to_le_bytes());
        let bytes = header(3, 2, 16000, 32, &data, 8);
        let buf = read_wav_bytes(&bytes).unwrap();
        assert_eq!(buf.samples(), &[0.5]);
    }

    #[test]
    fn data_past_eof_is_format_error() {
        let bytes = header(1, 1, 16000, 16, &[0, 0], 1000);
        assert!(matches!(read_wav_bytes(&bytes), Err(VadError::Format(_))));
    }

    #[test]
    fn mulaw_is_unsupported() {
        let bytes = header(7, 1, 8000, 8, &[0, 0], 2);
        assert!(matches!(
            read_wav_bytes(&bytes),
            Err(VadError::UnsupportedCodec(_))
        ));
    }

    #[test]
    fn not_riff() {
        assert!(matches!(
            read_wav_bytes(b"hello world!"),
            Err(VadError::Format(_))
        ));
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let buf = AudioBuffer::new(vec![0.0, 0.25, -0.5, 0.75], 16000).unwrap();
        write_wav(&path, &buf, WavEncoding::Float32).unwrap();
        assert_eq!(read_wav(&path).unwrap(), buf);
        write_wav(&path, &buf, WavEncoding::Pcm16).unwrap();
        assert_eq!(read_wav(&path).unwrap(), buf);
    }
}
