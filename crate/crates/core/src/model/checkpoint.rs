//! Binary checkpoint format.
//!
//! ```text
//! "RSEC" | version: u32 LE | header length: u32 LE | header (JSON)
//!        | tensor data (f32 LE, row-major, in header order) | CRC-32: u32 LE
//! ```
//!
//! The CRC covers every preceding byte. The header holds the encoder and
//! LoRA configuration, a free-form `meta` object and the tensor directory.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Encoder, EncoderConfig, LoraConfig, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RSEC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: EncoderConfig,
    lora: Option<LoraConfig>,
    meta: serde_json::Value,
    tensors: Vec<Entry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: [usize; 2],
    offset: usize,
    frozen: bool,
}

pub fn write_checkpoint(model: &Encoder<f32>, meta: &serde_json::Value, mut out: impl Write) -> Result<u32> {
    let mut offset = 0;
    let tensors = model
        .named_tensors()
        .map(|(name, t)| {
            let (r, c) = t.value.dim();
            let e = Entry {
                name: name.to_string(),
                shape: [r, c],
                offset,
                frozen: t.frozen,
            };
            offset += r * c * 4;
            e
        })
        .collect();
    let header = Header {
        config: model.config().clone(),
        lora: model.lora_config().cloned(),
        meta: meta.clone(),
        tensors,
    };
    let header = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(12 + header.len() + offset + 4);
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for t in model.tensors() {
        for v in t.value.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    out.write_all(&buf)
        .map_err(|e| Error::Checkpoint(format!("write failed: {e}")))?;
    Ok(crc)
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = at
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("truncated file".into()))?;
    let s = &bytes[*at..end];
    *at = end;
    Ok(s)
}

fn u32_at(bytes: &[u8], at: &mut usize) -> Result<u32> {
    Ok(u32::from_le_bytes(take(bytes, at, 4)?.try_into().unwrap()))
}

/// Parse a checkpoint, verifying magic, version, CRC and tensor layout.
pub fn read_checkpoint(bytes: &[u8]) -> Result<(Encoder<f32>, serde_json::Value)> {
    if bytes.len() < 16 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(Error::Checkpoint("CRC mismatch".into()));
    }
    let mut at = 4;
    let version = u32_at(body, &mut at)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = u32_at(body, &mut at)? as usize;
    let header: Header = serde_json::from_slice(take(body, &mut at, hlen)?)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let data = &body[at..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    let mut expected = 0;
    for e in &header.tensors {
        let [r, c] = e.shape;
        if e.offset != expected {
            return Err(Error::Checkpoint(format!(
                "{}: offset {} out of order",
                e.name, e.offset
            )));
        }
        let mut p = e.offset;
        let raw = take(data, &mut p, r * c * 4)?;
        expected = p;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let value = Array2::from_shape_vec((r, c), values).map_err(|err| Error::Checkpoint(err.to_string()))?;
        tensors.push(Tensor {
            value,
            frozen: e.frozen,
        });
    }
    if expected != data.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", data.len() - expected)));
    }
    let model =
        Encoder::from_parts(header.config, header.lora, tensors).map_err(|e| Error::Checkpoint(e.to_string()))?;
    for (spec, e) in model.specs().iter().zip(&header.tensors) {
        if spec.name != e.name {
            return Err(Error::Checkpoint(format!(
                "expected tensor {}, found {}",
                spec.name, e.name
            )));
        }
    }
    Ok((model, header.meta))
}

/// Write a checkpoint file and return its CRC.
pub fn save_checkpoint(model: &Encoder<f32>, meta: &serde_json::Value, path: &Path) -> Result<u32> {
    let mut buf = Vec::new();
    let crc = write_checkpoint(model, meta, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    Ok(crc)
}

pub fn load_checkpoint(path: &Path) -> Result<(Encoder<f32>, serde_json::Value)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LoraConfig;
    use serde_json::json;

    fn model() -> Encoder<f32> {
        let cfg = EncoderConfig {
            vocab_size: 25,
            hidden: 8,
            layers: 2,
            heads: 2,
            ff_dim: 16,
            max_len: 9,
            dropout: 0.1,
            num_labels: 7,
        };
        let mut m = Encoder::init(&cfg, 3).unwrap();
        m.apply_lora(&LoraConfig::new(2), 4).unwrap();
        m
    }

    #[test]
    fn round_trip() {
        let m = model();
        let meta = json!({"vocab_fingerprint": 1234});
        let mut buf = Vec::new();
        let crc = write_checkpoint(&m, &meta, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"RSEC");
        assert_eq!(u32::from_le_bytes(buf[buf.len() - 4..].try_into().unwrap()), crc);
        let (back, meta_back) = read_checkpoint(&buf).unwrap();
        assert_eq!(back, m);
        assert_eq!(meta_back, meta);
    }

    #[test]
    fn corruption_is_detected() {
        let mut buf = Vec::new();
        write_checkpoint(&model(), &json!(null), &mut buf).unwrap();
        let mut flipped = buf.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 1;
        assert!(read_checkpoint(&flipped).unwrap_err().to_string().contains("CRC"));
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        assert!(read_checkpoint(b"nope").is_err());
    }
}
