//! Checkpoint directory: one `EMBD` file per synthetic modality, `checkpoint.json`
//! with layout metadata, `trace.json` with the loss history and `timing.json`
//! with per-iteration wall times.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::condense::CondenseTrace;
use crate::data::{read_embedding_file, write_embedding_file, SyntheticSet};
use crate::error::{Error, Result};
use crate::scalar::{DType, Scalar};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const META_FILE: &str = "checkpoint.json";
pub const TRACE_FILE: &str = "trace.json";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Serialize, Deserialize)]
struct Timing {
    wall_time_secs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub modalities: Vec<String>,
    pub files: Vec<PathBuf>,
    pub num_classes: usize,
    pub dpc: usize,
    pub dim: usize,
    pub dtype: DType,
    #[serde(default)]
    pub normalized: bool,
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<S: for<'de> Deserialize<'de>>(path: &Path) -> Result<S> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes the checkpoint into `dir` (created if absent) and returns the trace as saved.
pub fn save_checkpoint<T: Scalar>(syn: &SyntheticSet<T>, trace: &CondenseTrace, dir: impl AsRef<Path>, normalized: bool) -> Result<CondenseTrace> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for set in syn.to_embedding_sets() {
        let file = PathBuf::from(format!("syn_{}.embd", set.modality_name));
        write_embedding_file(&set, dir.join(&file))?;
        files.push(file);
    }
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_VERSION,
        modalities: syn.modality_names.clone(),
        files: files.clone(),
        num_classes: syn.num_classes(),
        dpc: syn.dpc(),
        dim: syn.dim(),
        dtype: T::DTYPE,
        normalized,
    };
    write_json(&dir.join(META_FILE), &meta)?;
    let mut saved = trace.clone();
    saved.checkpoint_paths = files.iter().map(|f| f.display().to_string()).collect();
    write_json(&dir.join(TRACE_FILE), &saved)?;
    let timing = Timing {
        wall_time_secs: saved.iterations.iter().map(|r| r.wall_time_secs).collect(),
    };
    write_json(&dir.join(TIMING_FILE), &timing)?;
    Ok(saved)
}

pub fn load_checkpoint_meta(dir: impl AsRef<Path>) -> Result<CheckpointMeta> {
    let dir = dir.as_ref();
    if !dir.exists() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    let meta: CheckpointMeta = read_json(&dir.join(META_FILE))?;
    if meta.format_version != CHECKPOINT_VERSION {
        return Err(Error::InvalidDataset(format!(
            "unsupported checkpoint version {}",
            meta.format_version
        )));
    }
    Ok(meta)
}

pub fn load_checkpoint<T: Scalar>(dir: impl AsRef<Path>) -> Result<(SyntheticSet<T>, CondenseTrace)> {
    let dir = dir.as_ref();
    let meta = load_checkpoint_meta(dir)?;
    let mut mats = Vec::with_capacity(meta.files.len());
    let expected_labels: Vec<u32> = (0..meta.num_classes)
        .flat_map(|c| std::iter::repeat_n(c as u32, meta.dpc))
        .collect();
    for file in &meta.files {
        let set = read_embedding_file::<T>(dir.join(file))?;
        if set.labels != expected_labels || set.dim() != meta.dim {
            return Err(Error::InvalidDataset(format!(
                "{}: labels or dim disagree with checkpoint metadata",
                file.display()
            )));
        }
        mats.push(set.data);
    }
    let syn = SyntheticSet::new(meta.modalities.clone(), mats, meta.num_classes, meta.dpc)?;
    let mut trace: CondenseTrace = read_json(&dir.join(TRACE_FILE))?;
    let timing_path = dir.join(TIMING_FILE);
    if timing_path.exists() {
        let timing: Timing = read_json(&timing_path)?;
        for (record, secs) in trace.iterations.iter_mut().zip(timing.wall_time_secs) {
            record.wall_time_secs = secs;
        }
    }
    Ok((syn, trace))
}
