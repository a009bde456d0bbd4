//! Named-tensor container.
//!
//! Layout: the 8-byte magic `OPSPACE\0`, a little-endian `u32` format
//! version, a little-endian `u64` manifest length, the JSON manifest, then
//! every tensor's data as little-endian `f32` at the manifest's offsets
//! (relative to the start of the data section).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"OPSPACE\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    tensors: Vec<Entry>,
    meta: serde_json::Value,
}

/// Tensors plus free-form metadata read back from a checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor)>,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

pub fn encode_checkpoint(tensors: &[(String, Tensor)], meta: &serde_json::Value) -> Result<Vec<u8>> {
    let mut offset = 0;
    let mut entries = Vec::with_capacity(tensors.len());
    for (name, t) in tensors {
        entries.push(Entry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            offset,
        });
        offset += t.len() * 4;
    }
    let manifest = serde_json::to_vec(&Manifest {
        tensors: entries,
        meta: meta.clone(),
    })
    .map_err(|e| TensorError::Checkpoint(e.to_string()))?;
    let mut out = Vec::with_capacity(20 + manifest.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    for (_, t) in tensors {
        for x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let bad = |m: &str| TensorError::Checkpoint(m.to_string());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(TensorError::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let manifest_end = 20usize
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes[20..manifest_end]).map_err(|e| TensorError::Checkpoint(e.to_string()))?;
    let data = &bytes[manifest_end..];
    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for e in manifest.tensors {
        let n: usize = e.shape.iter().product();
        let span = data
            .get(e.offset..e.offset + n * 4)
            .ok_or_else(|| TensorError::Checkpoint(format!("tensor `{}` is truncated", e.name)))?;
        let values = span
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push((e.name, Tensor::new(e.shape, values)?));
    }
    Ok(Checkpoint {
        tensors,
        meta: manifest.meta,
    })
}

pub fn save_checkpoint(path: &Path, tensors: &[(String, Tensor)], meta: &serde_json::Value) -> Result<()> {
    let bytes = encode_checkpoint(tensors, meta)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_checkpoint(&bytes)
}
