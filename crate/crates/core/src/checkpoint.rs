//! Versioned binary checkpoints.
//!
//! Layout: 8-byte magic, `u32` container version, `u64` header length, a
//! JSON header (dims, neighborhood rule, metadata, tensor directory), the
//! tensors as little-endian `f64`, then a SHA-256 of everything before it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{AgentModel, AgentParams, ModelDims, MODEL_FORMAT_VERSION};
use crate::environment::NeighborhoodModel;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RRMCKPT\0";
pub const CONTAINER_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub iteration: u64,
}

/// A model plus any extra named tensors (optimizer moments, trainer state).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: AgentModel,
    pub meta: CheckpointMeta,
    pub extra: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model_version: u32,
    dims: ModelDims,
    feature_model: NeighborhoodModel,
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
    extra: Vec<TensorEntry>,
}

pub fn to_bytes(ckpt: &Checkpoint) -> Vec<u8> {
    let params = ckpt.model.params.tensors();
    let header = Header {
        model_version: ckpt.model.version,
        dims: ckpt.model.dims,
        feature_model: ckpt.model.feature_model,
        meta: ckpt.meta.clone(),
        tensors: params
            .iter()
            .map(|(n, v)| TensorEntry {
                name: n.clone(),
                len: v.len(),
            })
            .collect(),
        extra: ckpt
            .extra
            .iter()
            .map(|(n, v)| TensorEntry {
                name: n.clone(),
                len: v.len(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    let values = params
        .iter()
        .map(|(_, v)| *v)
        .chain(ckpt.extra.iter().map(|(_, v)| v.as_slice()));
    for tensor in values {
        for x in tensor {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_slice());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(what, "checkpoint truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn floats(&mut self, len: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(len.checked_mul(8).ok_or_else(|| Error::parse(what, "length overflow"))?, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 12 + DIGEST_LEN {
        return Err(Error::parse("checkpoint", "file too short"));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::parse("checkpoint", "bad magic"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::parse("checkpoint", "checksum mismatch"));
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let version = u32::from_le_bytes(r.take(4, "container version")?.try_into().expect("4"));
    if version != CONTAINER_VERSION {
        return Err(Error::Incompatible(format!(
            "container version {version}, expected {CONTAINER_VERSION}"
        )));
    }
    let header_len = u64::from_le_bytes(r.take(8, "header length")?.try_into().expect("8"));
    let header_bytes = r.take(header_len as usize, "header")?;
    let header: Header = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::parse("checkpoint header", e.to_string()))?;
    if header.model_version != MODEL_FORMAT_VERSION {
        return Err(Error::Incompatible(format!(
            "model version {}, this build reads {MODEL_FORMAT_VERSION}",
            header.model_version
        )));
    }
    header.dims.validate()?;
    let mut params = AgentParams::zeros(&header.dims);
    {
        let slots = params.tensors_mut();
        if slots.len() != header.tensors.len() {
            return Err(Error::Structural("tensor directory does not match dims".into()));
        }
        for ((name, slot), entry) in slots.into_iter().zip(&header.tensors) {
            if name != entry.name || slot.len() != entry.len {
                return Err(Error::Structural(format!(
                    "tensor `{}` ({}) does not match expected `{name}` ({})",
                    entry.name,
                    entry.len,
                    slot.len()
                )));
            }
            *slot = r.floats(entry.len, &entry.name)?;
        }
    }
    let mut extra = Vec::with_capacity(header.extra.len());
    for entry in &header.extra {
        extra.push((entry.name.clone(), r.floats(entry.len, &entry.name)?));
    }
    if r.pos != body.len() {
        return Err(Error::parse("checkpoint", "trailing bytes after tensors"));
    }
    Ok(Checkpoint {
        model: AgentModel {
            dims: header.dims,
            feature_model: header.feature_model,
            version: header.model_version,
            params,
        },
        meta: header.meta,
        extra,
    })
}

/// Writes through a temporary file so a crash never leaves a torn checkpoint.
pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, to_bytes(ckpt)).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

pub fn save_model(model: &AgentModel, meta: CheckpointMeta, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(
        path,
        &Checkpoint {
            model: model.clone(),
            meta,
            extra: Vec::new(),
        },
    )
}

pub fn load_model(path: impl AsRef<Path>) -> Result<AgentModel> {
    read_checkpoint(path).map(|c| c.model)
}
