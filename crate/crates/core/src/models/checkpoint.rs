//! Checkpoint files: `manifest.json` plus one little-endian `f32` blob.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelParams, ParamStore};
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub byte_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub iteration: u64,
    pub blob: String,
    pub total_bytes: u64,
    pub entries: Vec<CheckpointEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub iteration: u64,
    /// FNV-1a hash of the blob, hex encoded.
    pub id: String,
}

fn fnv1a(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn stores(p: &ModelParams) -> [(&'static str, &ParamStore); 3] {
    [
        ("generator", &p.generator),
        ("critic", &p.critic),
        ("siamese", &p.siamese),
    ]
}

/// Writes `dir/manifest.json` and `dir/params.bin`; returns the checkpoint id.
pub fn save_checkpoint(dir: &Path, params: &ModelParams, iteration: u64) -> Result<String> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = Vec::with_capacity(params.elements() * 4);
    let mut entries = Vec::new();
    for (prefix, store) in stores(params) {
        for (name, t) in store.names().iter().zip(store.tensors()) {
            entries.push(CheckpointEntry {
                name: format!("{prefix}.{name}"),
                shape: t.shape().to_vec(),
                dtype: "f32".into(),
                byte_offset: blob.len() as u64,
            });
            for v in t.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let manifest = Manifest {
        format: "kss-checkpoint".into(),
        version: 1,
        config: params.config.clone(),
        seed: params.seed,
        iteration,
        blob: BLOB_FILE.into(),
        total_bytes: blob.len() as u64,
        entries,
    };
    let blob_path = dir.join(BLOB_FILE);
    fs::write(&blob_path, &blob).map_err(|e| Error::io(&blob_path, e))?;
    let mpath = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&mpath, e))?;
    fs::write(&mpath, json + "\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(fnv1a(&blob))
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(&mpath, e))?;
    if manifest.format != "kss-checkpoint" || manifest.version != 1 {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint format {} v{}",
            manifest.format, manifest.version
        )));
    }
    let bpath = dir.join(&manifest.blob);
    let blob = fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;
    if blob.len() as u64 != manifest.total_bytes {
        return Err(Error::Checkpoint(format!(
            "blob is {} bytes, manifest declares {}",
            blob.len(),
            manifest.total_bytes
        )));
    }
    let mut params = ModelParams::init(manifest.config.clone(), manifest.seed)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut expected_offset = 0u64;
    let mut cursor = manifest.entries.iter();
    for (prefix, store) in [
        ("generator", &mut params.generator),
        ("critic", &mut params.critic),
        ("siamese", &mut params.siamese),
    ] {
        let mut loaded = Vec::with_capacity(store.len());
        for (name, t) in store.names().iter().zip(store.tensors()) {
            let entry = cursor
                .next()
                .ok_or_else(|| Error::Checkpoint(format!("manifest is missing {prefix}.{name}")))?;
            if entry.name != format!("{prefix}.{name}") || entry.shape != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "entry {} {:?} does not match expected {prefix}.{name} {:?}",
                    entry.name,
                    entry.shape,
                    t.shape()
                )));
            }
            if entry.dtype != "f32" || entry.byte_offset != expected_offset {
                return Err(Error::Checkpoint(format!(
                    "entry {} has dtype {} at offset {}, expected f32 at {expected_offset}",
                    entry.name, entry.dtype, entry.byte_offset
                )));
            }
            let len = t.numel();
            let start = entry.byte_offset as usize;
            if start + 4 * len > blob.len() {
                return Err(Error::Checkpoint(format!(
                    "entry {} runs past the end of the {}-byte blob",
                    entry.name,
                    blob.len()
                )));
            }
            let bytes = &blob[start..start + 4 * len];
            let data = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            loaded.push(Tensor::new(entry.shape.clone(), data)?);
            expected_offset += 4 * len as u64;
        }
        store.set_tensors(loaded)?;
    }
    if cursor.next().is_some() || expected_offset != manifest.total_bytes {
        return Err(Error::Checkpoint(
            "manifest lists unexpected extra entries".into(),
        ));
    }
    Ok(Checkpoint {
        params,
        iteration: manifest.iteration,
        id: fnv1a(&blob),
    })
}
