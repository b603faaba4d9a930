//! JSON manifest tying per-modality `EMBD` files into one paired dataset.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::embd::{decode_embedding, write_embedding_file};
use crate::data::PairedMultiModalDataset;
use crate::error::{Error, Result};
use crate::scalar::{DType, Scalar};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityEntry {
    pub name: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub modalities: Vec<ModalityEntry>,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub dim: usize,
    pub count: usize,
    pub dtype: DType,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoder: Option<String>,
}

impl DatasetManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if manifest.format_version != MANIFEST_VERSION {
            return Err(Error::InvalidDataset(format!(
                "unsupported manifest version {}",
                manifest.format_version
            )));
        }
        Ok(manifest)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, manifest_path: &Path, entry: &ModalityEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            manifest_path.parent().unwrap_or(Path::new(".")).join(&entry.path)
        }
    }
}

/// Loads every modality referenced by the manifest and checks headers against it.
pub fn load_dataset<T: Scalar>(manifest_path: impl AsRef<Path>) -> Result<(PairedMultiModalDataset<T>, DatasetManifest)> {
    let manifest_path = manifest_path.as_ref();
    let manifest = DatasetManifest::read(manifest_path)?;
    let mut sets = Vec::with_capacity(manifest.modalities.len());
    for entry in &manifest.modalities {
        let path = manifest.resolve(manifest_path, entry);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let set = decode_embedding::<T>(&bytes, &entry.name).map_err(|source| Error::Format {
            path: path.clone(),
            source,
        })?;
        if DType::from_tag(bytes[20]) != Some(manifest.dtype) {
            return Err(Error::InvalidDataset(format!(
                "{}: dtype tag {} does not match manifest dtype {:?}",
                path.display(),
                bytes[20],
                manifest.dtype
            )));
        }
        if set.dim() != manifest.dim || set.count() != manifest.count {
            return Err(Error::InvalidDataset(format!(
                "{}: header {}x{} does not match manifest {}x{}",
                path.display(),
                set.count(),
                set.dim(),
                manifest.count,
                manifest.dim
            )));
        }
        sets.push(set);
    }
    let dataset = PairedMultiModalDataset::new(sets, manifest.num_classes, manifest.class_names.clone())?;
    Ok((dataset, manifest))
}

/// Writes `<dir>/<modality>.embd` for every modality plus `<dir>/manifest.json`.
pub fn save_dataset<T: Scalar>(dataset: &PairedMultiModalDataset<T>, dir: impl AsRef<Path>, seed: Option<u64>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for set in dataset.modalities() {
        let file = PathBuf::from(format!("{}.embd", set.modality_name));
        write_embedding_file(set, dir.join(&file))?;
        entries.push(ModalityEntry {
            name: set.modality_name.clone(),
            path: file,
        });
    }
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        modalities: entries,
        num_classes: dataset.num_classes(),
        class_names: dataset.class_names().to_vec(),
        dim: dataset.dim(),
        count: dataset.count(),
        dtype: T::DTYPE,
        seed,
        encoder: None,
    };
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}
