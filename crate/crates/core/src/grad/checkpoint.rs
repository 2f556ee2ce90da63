//! Parameter checkpoints: a flat little-endian `f64` blob plus a JSON
//! manifest giving each tensor's name, shape and byte range.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::{Tensor, MAX_RANK};
use crate::error::{Error, Result};

pub const FORMAT: &str = "spikelink-checkpoint";
pub const VERSION: u32 = 1;
pub const DTYPE: &str = "f64-le";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub length: u64,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub total_bytes: u64,
    pub tensors: Vec<TensorEntry>,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

pub fn encode(store: &ParamStore, metadata: serde_json::Value) -> (Vec<u8>, Manifest) {
    let mut blob = Vec::new();
    let mut tensors = Vec::with_capacity(store.len());
    for p in store.iter() {
        let offset = blob.len() as u64;
        for v in p.value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        tensors.push(TensorEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset,
            length: blob.len() as u64 - offset,
            trainable: p.trainable,
        });
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        dtype: DTYPE.into(),
        total_bytes: blob.len() as u64,
        tensors,
        metadata,
    };
    (blob, manifest)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Rebuilds a store from a parsed manifest and its blob, validating every
/// byte range.
pub fn decode(manifest: &Manifest, blob: &[u8]) -> Result<ParamStore> {
    if manifest.format != FORMAT || manifest.version != VERSION || manifest.dtype != DTYPE {
        return Err(bad(format!(
            "unsupported checkpoint {} v{} ({})",
            manifest.format, manifest.version, manifest.dtype
        )));
    }
    if manifest.total_bytes != blob.len() as u64 {
        return Err(bad(format!(
            "manifest declares {} bytes, blob has {}",
            manifest.total_bytes,
            blob.len()
        )));
    }
    let mut store = ParamStore::new();
    let mut cursor = 0u64;
    for e in &manifest.tensors {
        if e.shape.len() > MAX_RANK {
            return Err(bad(format!("{}: rank {} too large", e.name, e.shape.len())));
        }
        let count = e
            .shape
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or_else(|| bad(format!("{}: shape overflows", e.name)))?;
        if count.checked_mul(8) != Some(e.length) {
            return Err(bad(format!(
                "{}: length {} does not match shape {:?}",
                e.name, e.length, e.shape
            )));
        }
        if e.offset != cursor {
            return Err(bad(format!(
                "{}: offset {} is not contiguous (expected {cursor})",
                e.name, e.offset
            )));
        }
        let end = cursor
            .checked_add(e.length)
            .filter(|&end| end <= blob.len() as u64)
            .ok_or_else(|| bad(format!("{}: byte range past end of blob", e.name)))?;
        let bytes = &blob[cursor as usize..end as usize];
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        store.add(e.name.clone(), Tensor::new(&e.shape, data)?, e.trainable)?;
        cursor = end;
    }
    if cursor != blob.len() as u64 {
        return Err(bad(format!(
            "{} trailing bytes after last tensor",
            blob.len() as u64 - cursor
        )));
    }
    Ok(store)
}

/// Parses manifest text and blob together.
pub fn parse(manifest_json: &[u8], blob: &[u8]) -> Result<(ParamStore, serde_json::Value)> {
    let manifest: Manifest = serde_json::from_slice(manifest_json)?;
    let store = decode(&manifest, blob)?;
    Ok((store, manifest.metadata))
}

/// `stem.json` and `stem.bin` for a checkpoint path given with or without
/// either extension.
pub fn paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("json"), with("bin"))
}

pub fn save(path: &Path, store: &ParamStore, metadata: serde_json::Value) -> Result<()> {
    let (json_path, bin_path) = paths(path);
    let (blob, manifest) = encode(store, metadata);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&bin_path, blob).map_err(|e| Error::io(&bin_path, e))?;
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(ParamStore, serde_json::Value)> {
    let (json_path, bin_path) = paths(path);
    let text = fs::read(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let blob = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    parse(&text, &blob)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamStore {
        let mut s = ParamStore::new();
        s.add(
            "w",
            Tensor::new(&[2, 2], vec![1.0, -0.5, f64::MIN_POSITIVE, 3.25]).unwrap(),
            true,
        )
        .unwrap();
        s.add(
            "bn.mean",
            Tensor::new(&[3], vec![0.1, 0.2, 0.3]).unwrap(),
            false,
        )
        .unwrap();
        s.add("scalar", Tensor::scalar(7.0), true).unwrap();
        s
    }

    #[test]
    fn reload_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt");
        let store = sample();
        save(&path, &store, serde_json::json!({"note": "x"})).unwrap();
        let (back, meta) = load(&path.with_extension("json")).unwrap();
        assert_eq!(meta["note"], "x");
        for (a, b) in store.iter().zip(back.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.trainable, b.trainable);
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
    }

    #[test]
    fn rejects_inconsistent_manifest() {
        let (blob, manifest) = encode(&sample(), serde_json::Value::Null);
        assert!(decode(&manifest, &blob[..blob.len() - 1]).is_err());

        let mut m = manifest.clone();
        m.tensors[1].offset += 8;
        assert!(decode(&m, &blob).is_err());

        let mut m = manifest.clone();
        m.tensors[0].shape = vec![usize::MAX, 2];
        assert!(decode(&m, &blob).is_err());

        let mut m = manifest;
        m.version = 2;
        assert!(decode(&m, &blob).is_err());
    }
}
