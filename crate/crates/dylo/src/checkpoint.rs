//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "DYLO"            4-byte magic
//! version           u32
//! header_len        u32, then header_len bytes of JSON
//!                   (model config + training metadata)
//! tensor_count      u32
//! per tensor:       name_len u16, name bytes,
//!                   ndim u8, ndim dims as u32,
//!                   numel values as f32
//! ```
//!
//! Values are stored as f32; loading rebuilds the network from the stored
//! config and copies the values into its parameters in order, verifying
//! every name and shape. Any mismatch, truncation, or trailing garbage is
//! an error, never a partial load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Detector, ModelConfig};
use crate::tensor::Scalar;

pub const MAGIC: [u8; 4] = *b"DYLO";
pub const FORMAT_VERSION: u32 = 1;

/// Training state stored alongside the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub best_val_map: f64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    meta: CheckpointMeta,
}

/// Serialize a model, its config, and metadata to checkpoint bytes.
pub fn encode<T: Scalar>(
    model: &Detector<T>,
    config: &ModelConfig,
    meta: &CheckpointMeta,
) -> Result<Vec<u8>> {
    let header = Header {
        config: config.clone(),
        meta: meta.clone(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::Checkpoint(format!("header serialization failed: {e}")))?;
    let params = model.named_params();

    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, p) in &params {
        if name.len() > u16::MAX as usize {
            return Err(Error::Checkpoint(format!(
                "parameter name {name:?} is too long to store"
            )));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let shape = p.shape();
        out.push(shape.len() as u8);
        for &d in &shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.to_vec() {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Rebuild a model from checkpoint bytes.
pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<(Detector<T>, ModelConfig, CheckpointMeta)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Checkpoint(
            "not a model checkpoint (bad magic)".into(),
        ));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let header_len = r.u32("header length")? as usize;
    let header_bytes = r.take(header_len, "header")?;
    let header: Header = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::Checkpoint(format!("malformed header: {e}")))?;
    header.config.validate()?;

    let model: Detector<T> = Detector::new(&header.config)?;
    let params = model.named_params();
    let count = r.u32("tensor count")? as usize;
    if count != params.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint stores {count} tensors but the model has {}",
            params.len()
        )));
    }
    for (i, (name, p)) in params.iter().enumerate() {
        let name_len = r.u16("tensor name length")? as usize;
        let got_name = std::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| Error::Checkpoint(format!("tensor {i} name is not UTF-8")))?;
        if got_name != name {
            return Err(Error::Checkpoint(format!(
                "tensor {i} is named {got_name:?} but the model expects {name:?}"
            )));
        }
        let ndim = r.u8("tensor rank")? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32("tensor dimension")? as usize);
        }
        let expect = p.shape();
        if dims != expect {
            return Err(Error::Checkpoint(format!(
                "tensor {name:?} has shape {dims:?} but the model expects {expect:?}"
            )));
        }
        let numel: usize = dims.iter().product();
        let raw = r.take(numel * 4, "tensor values")?;
        let values: Vec<T> = raw
            .chunks_exact(4)
            .map(|c| T::from_f64(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        p.set_data(&values);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok((model, header.config, header.meta))
}

/// Write a checkpoint file.
pub fn save<T: Scalar>(
    path: &Path,
    model: &Detector<T>,
    config: &ModelConfig,
    meta: &CheckpointMeta,
) -> Result<()> {
    let bytes = encode(model, config, meta)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read a checkpoint file.
pub fn load<T: Scalar>(path: &Path) -> Result<(Detector<T>, ModelConfig, CheckpointMeta)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
