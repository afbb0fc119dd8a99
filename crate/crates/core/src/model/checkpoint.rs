//! `PTCK` checkpoint container.
//!
//! ```text
//! "PTCK" | u32 LE version | u64 LE metadata length | metadata (UTF-8 JSON)
//!        | f64 LE parameter values, tensors in G0..G4 storage order
//! ```
//!
//! The metadata echoes the model config and lists each group with its
//! tensors' names and shapes, so the data section needs no framing.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, GROUP_NAMES};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PTCK";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config: ModelConfig,
    pub groups: Vec<GroupMeta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMeta {
    pub name: String,
    pub param_count: usize,
    pub tensors: Vec<TensorMeta>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorMeta {
    pub name: String,
    pub shape: Vec<usize>,
}

fn metadata(model: &Model) -> CheckpointMeta {
    let groups = model
        .groups()
        .iter()
        .map(|g| GroupMeta {
            name: g.name.clone(),
            param_count: g.param_count,
            tensors: g
                .params
                .iter()
                .map(|&i| TensorMeta {
                    name: model.specs()[i].name.clone(),
                    shape: model.specs()[i].shape.clone(),
                })
                .collect(),
        })
        .collect();
    CheckpointMeta {
        config: model.config().clone(),
        groups,
    }
}

pub fn encode(model: &Model) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(&metadata(model))?;
    let mut out = Vec::with_capacity(16 + meta.len() + 8 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    for g in 0..GROUP_NAMES.len() {
        out.extend(model.group_bytes(g));
    }
    Ok(out)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Checkpoint(format!("truncated {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

/// Reads the metadata block only.
pub fn read_meta(bytes: &[u8]) -> Result<(CheckpointMeta, usize)> {
    let mut rest = bytes;
    if take(&mut rest, 4, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(take(&mut rest, 4, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(take(&mut rest, 8, "metadata length")?.try_into().unwrap());
    let meta = take(&mut rest, len as usize, "metadata")?;
    let meta: CheckpointMeta =
        serde_json::from_slice(meta).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
    Ok((meta, bytes.len() - rest.len()))
}

pub fn decode(bytes: &[u8]) -> Result<Model> {
    let (meta, offset) = read_meta(bytes)?;
    let expected = metadata(&Model::init(&meta.config)?);
    if expected.groups != meta.groups {
        return Err(Error::Checkpoint(
            "tensor layout does not match the config".into(),
        ));
    }
    let mut rest = &bytes[offset..];
    let mut values = Vec::new();
    for t in meta.groups.iter().flat_map(|g| &g.tensors) {
        let n: usize = t.shape.iter().product();
        let raw = take(&mut rest, 8 * n, &t.name)?;
        values.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Model::from_parts(&meta.config, values)
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, encode(model)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
