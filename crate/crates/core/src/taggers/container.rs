//! On-disk model format: a directory holding `manifest.json` and
//! `tensors.bin` (little-endian `f32`, concatenated in manifest order).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoders::Vocab;
use crate::error::{Error, Result};
use crate::graph::{Matrix, ParamStore};
use crate::taggers::{build_tagger, Tagger, TaggerConfig};

pub const CONTAINER_VERSION: u32 = 1;
const FORMAT: &str = "oncoie-model";
const MANIFEST: &str = "manifest.json";
const TENSORS: &str = "tensors.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Offset into `tensors.bin`, in `f32` elements.
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    /// What the parameters belong to, e.g. `tagger` or `mrc`.
    pub kind: String,
    pub config: serde_json::Value,
    pub vocab: Vocab,
    pub tensors: Vec<TensorEntry>,
}

/// Writes `store` together with the configuration needed to rebuild it.
pub fn save_store(
    dir: &Path,
    kind: &str,
    config: serde_json::Value,
    vocab: &Vocab,
    store: &ParamStore,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::with_capacity(store.scalar_count() * 4);
    let mut tensors = Vec::with_capacity(store.len());
    let mut offset = 0;
    for (name, value) in store.iter() {
        for &x in value.iter() {
            bytes.extend_from_slice(&(x as f32).to_le_bytes());
        }
        tensors.push(TensorEntry {
            name: name.to_string(),
            rows: value.nrows(),
            cols: value.ncols(),
            offset,
            len: value.len(),
        });
        offset += value.len();
    }
    let manifest = Manifest {
        format: FORMAT.to_string(),
        version: CONTAINER_VERSION,
        kind: kind.to_string(),
        config,
        vocab: vocab.clone(),
        tensors,
    };
    fs::write(dir.join(TENSORS), bytes)?;
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    // check the version before the shape so newer layouts get a clear error
    let version = raw.get("version").and_then(|v| v.as_u64()).ok_or_else(|| {
        Error::Integrity(format!("{}: manifest has no version", dir.display()))
    })?;
    if version != u64::from(CONTAINER_VERSION) {
        return Err(Error::UnsupportedVersion {
            found: version.min(u64::from(u32::MAX)) as u32,
            supported: CONTAINER_VERSION,
        });
    }
    let manifest: Manifest = serde_json::from_value(raw)?;
    if manifest.format != FORMAT {
        return Err(Error::Integrity(format!("unexpected format `{}`", manifest.format)));
    }
    Ok(manifest)
}

/// Loads parameters into `store`, whose names and shapes must match the
/// container exactly.
pub fn load_store(dir: &Path, manifest: &Manifest, store: &mut ParamStore) -> Result<()> {
    let bytes = fs::read(dir.join(TENSORS))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Integrity(format!("{TENSORS} length {} is not a multiple of 4", bytes.len())));
    }
    let floats: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let expected: usize = manifest.tensors.iter().map(|t| t.len).sum();
    if floats.len() != expected {
        return Err(Error::Integrity(format!(
            "{TENSORS} holds {} values, manifest expects {expected}",
            floats.len()
        )));
    }
    if manifest.tensors.len() != store.len() {
        return Err(Error::Integrity(format!(
            "container has {} tensors, model has {}",
            manifest.tensors.len(),
            store.len()
        )));
    }
    for (entry, id) in manifest.tensors.iter().zip(store.ids().collect::<Vec<_>>()) {
        let target = store.get(id);
        if entry.name != store.name(id) || target.dim() != (entry.rows, entry.cols) {
            return Err(Error::Integrity(format!(
                "tensor `{}` {}x{} does not match model tensor `{}` {:?}",
                entry.name,
                entry.rows,
                entry.cols,
                store.name(id),
                target.dim()
            )));
        }
        if entry.len != entry.rows * entry.cols || entry.offset + entry.len > floats.len() {
            return Err(Error::Integrity(format!("tensor `{}` has an invalid extent", entry.name)));
        }
        let slice = &floats[entry.offset..entry.offset + entry.len];
        let value = Matrix::from_shape_fn((entry.rows, entry.cols), |(r, c)| {
            f64::from(slice[r * entry.cols + c])
        });
        *store.get_mut(id) = value;
    }
    Ok(())
}

pub fn save_model(model: &Tagger, dir: &Path) -> Result<()> {
    save_store(
        dir,
        "tagger",
        serde_json::to_value(model.config())?,
        model.vocab(),
        model.store(),
    )
}

pub fn load_model(dir: &Path) -> Result<Tagger> {
    let manifest = read_manifest(dir)?;
    if manifest.kind != "tagger" {
        return Err(Error::Integrity(format!(
            "{} holds a `{}` model, not a tagger",
            dir.display(),
            manifest.kind
        )));
    }
    let cfg: TaggerConfig = serde_json::from_value(manifest.config.clone())?;
    let mut model = build_tagger(&cfg, manifest.vocab.clone())?;
    load_store(dir, &manifest, model.store_mut())?;
    Ok(model)
}
