//! `CBLV` model files.
//!
//! Layout (all little-endian): magic `CBLV`, `u32` version, ten `u32`
//! config fields (conv1 kh, kw, width, conv2 kh, kw, width, dense width,
//! lstm width, input height, input width), `f32` dropout, `u8`
//! bidirectional. Then each tensor in [`ModelParams::tensors`] order as a
//! `u32` rank, `u32` dims and row-major `f32` values. A trailing `u8`
//! flags an optional normalization block (32 means, 32 stds).

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::error::{Result, VadError};
use crate::features::NormStats;
use crate::nn::Tensor;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"CBLV";
pub const MODEL_VERSION: u32 = 1;

/// Serializes parameters (stored as `f32` regardless of `F`).
pub fn write_model<F: Scalar>(params: &ModelParams<F>) -> Vec<u8> {
    let c = &params.config;
    let mut out = Vec::with_capacity(64 + params.scalar_count() * 4);
    out.extend_from_slice(MAGIC);
    let put = |v: u32, out: &mut Vec<u8>| out.extend_from_slice(&v.to_le_bytes());
    put(MODEL_VERSION, &mut out);
    for v in [
        c.conv1_kernel[0],
        c.conv1_kernel[1],
        c.conv1_width,
        c.conv2_kernel[0],
        c.conv2_kernel[1],
        c.conv2_width,
        c.dense_width,
        c.lstm_width,
        c.input_height,
        c.input_width,
    ] {
        put(v as u32, &mut out);
    }
    out.extend_from_slice(&c.dropout_rate.to_le_bytes());
    out.push(u8::from(c.bidirectional));
    for t in params.tensors() {
        put(t.dims().len() as u32, &mut out);
        for &d in t.dims() {
            put(d as u32, &mut out);
        }
        for v in t.values() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    match &params.norm {
        None => out.push(0),
        Some(n) => {
            out.push(1);
            for v in n.mean.iter().chain(&n.std) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.at < n {
            return Err(VadError::Corruption(format!(
                "model file truncated while reading {what}"
            )));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

pub fn read_model<F: Scalar>(bytes: &[u8]) -> Result<ModelParams<F>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(VadError::Format("not a CBLV model file".into()));
    }
    let mut r = Reader { bytes, at: 4 };
    let version = r.u32("version")?;
    if version != MODEL_VERSION {
        return Err(VadError::Format(format!(
            "model file version {version} unsupported (supported: {MODEL_VERSION})"
        )));
    }
    let mut f = [0usize; 10];
    for v in &mut f {
        *v = r.u32("config")? as usize;
    }
    let dropout_rate = r.f32("config")?;
    let bidirectional = match r.u8("config")? {
        0 => false,
        1 => true,
        b => {
            return Err(VadError::Corruption(format!(
                "bidirectional flag {b} is not 0 or 1"
            )))
        }
    };
    let config = ModelConfig {
        conv1_kernel: [f[0], f[1]],
        conv1_width: f[2],
        conv2_kernel: [f[3], f[4]],
        conv2_width: f[5],
        dense_width: f[6],
        lstm_width: f[7],
        bidirectional,
        dropout_rate,
        input_height: f[8],
        input_width: f[9],
    };
    let expected = ModelParams::<F>::expected_dims(&config)
        .map_err(|e| VadError::Corruption(format!("stored config is invalid: {e}")))?;
    let mut tensors = Vec::with_capacity(expected.len());
    for (k, want) in expected.iter().enumerate() {
        let what = format!("tensor {k}");
        let rank = r.u32(&what)? as usize;
        let dims = (0..rank)
            .map(|_| r.u32(&what).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        if &dims != want {
            return Err(VadError::Corruption(format!(
                "{what} has dims {dims:?}, config implies {want:?}"
            )));
        }
        let n: usize = dims.iter().product();
        let raw = r.take(4 * n, &what)?;
        let values = raw
            .chunks_exact(4)
            .map(|b| F::lit(f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64))
            .collect();
        tensors.push(Tensor::new(dims, values)?);
    }
    let norm = match r.u8("normalization flag")? {
        0 => None,
        1 => {
            let bands = crate::features::IMAGE_BANDS;
            let read = |r: &mut Reader| {
                (0..bands)
                    .map(|_| r.f32("normalization"))
                    .collect::<Result<Vec<_>>>()
            };
            let mean = read(&mut r)?;
            let std = read(&mut r)?;
            Some(NormStats { mean, std })
        }
        b => {
            return Err(VadError::Corruption(format!(
                "normalization flag {b} is not 0 or 1"
            )))
        }
    };
    if r.at != bytes.len() {
        return Err(VadError::Corruption(format!(
            "{} trailing bytes after model payload",
            bytes.len() - r.at
        )));
    }
    ModelParams::from_tensors(config, tensors, norm)
}

pub fn save_model<F: Scalar>(params: &ModelParams<F>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_model(params))?;
    Ok(())
}

pub fn load_model<F: Scalar>(path: impl AsRef<Path>) -> Result<ModelParams<F>> {
    read_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;

    fn bits(p: &ModelParams<f32>) -> Vec<u32> {
        p.tensors()
            .iter()
            .flat_map(|t| t.values().iter().map(|v| v.to_bits()))
            .collect()
    }

    #[test]
    fn best_round_trip_is_bit_exact() {
        let mut p: ModelParams<f32> = build_model(&ModelConfig::best(), 3).unwrap();
        p.norm = Some(NormStats {
            mean: (0..32).map(|i| i as f32 * 0.5).collect(),
            std: vec![1.25; 32],
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.cblv");
        save_model(&p, &path).unwrap();
        let q: ModelParams<f32> = load_model(&path).unwrap();
        assert_eq!(q.config, p.config);
        assert_eq!(bits(&q), bits(&p));
        assert_eq!(q.norm, p.norm);
    }

    #[test]
    fn unidirectional_round_trip() {
        let cfg = ModelConfig {
            bidirectional: false,
            ..ModelConfig::small()
        };
        let p: ModelParams<f32> = build_model(&cfg, 4).unwrap();
        let q: ModelParams<f32> = read_model(&write_model(&p)).unwrap();
        assert!(q.lstm_bwd.is_none());
        assert_eq!(bits(&q), bits(&p));
    }

    #[test]
    fn truncated_is_corruption() {
        let p: ModelParams<f32> = build_model(&ModelConfig::small(), 1).unwrap();
        let bytes = write_model(&p);
        for cut in [20, 60, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(
                    read_model::<f32>(&bytes[..cut]),
                    Err(VadError::Corruption(_))
                ),
                "cut {cut}"
            );
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            read_model::<f32>(&long),
            Err(VadError::Corruption(_))
        ));
    }

    #[test]
    fn version_99_names_supported() {
        let p: ModelParams<f32> = build_model(&ModelConfig::small(), 1).unwrap();
        let mut bytes = write_model(&p);
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        match read_model::<f32>(&bytes) {
            Err(VadError::Format(m)) => assert!(m.contains("supported: 1"), "{m}"),
            other => panic!("{other:?}"),
        }
        bytes[0] = b'X';
        assert!(matches!(
            read_model::<f32>(&bytes),
            Err(VadError::Format(_))
        ));
    }
}
