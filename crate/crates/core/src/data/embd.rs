//! The `EMBD` binary embedding format.
//!
//! Layout (all integers little-endian):
//! - magic `b"EMBD"`
//! - version: u32 (= 1)
//! - dim: u32
//! - count: u64
//! - dtype: u8 (0 = f32, 1 = f64)
//! - values: count * dim elements, row-major
//! - labels: count * u32

use std::fs;
use std::path::Path;

use crate::data::EmbeddingSet;
use crate::error::{Error, FormatError, Result};
use crate::matrix::Matrix;
use crate::scalar::{DType, Scalar};

pub const MAGIC: &[u8; 4] = b"EMBD";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 21;

/// Serializes `set` with element type `dtype`. Rejects non-finite values.
pub fn encode_embedding<T: Scalar>(set: &EmbeddingSet<T>, dtype: DType) -> Result<Vec<u8>> {
    set.validate()?;
    let dim = u32::try_from(set.dim()).map_err(|_| Error::InvalidDataset("dim exceeds u32".into()))?;
    let count = set.count();
    let mut out = Vec::with_capacity(HEADER_LEN + count * set.dim() * dtype.size() + 4 * count);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(count as u64).to_le_bytes());
    out.push(dtype.tag());
    for &v in set.data.as_slice() {
        let v = v.to_f64_lossy();
        match dtype {
            DType::F32 => {
                let narrowed = v as f32;
                if !narrowed.is_finite() {
                    return Err(Error::InvalidDataset(format!("value {v} overflows f32")));
                }
                out.extend_from_slice(&narrowed.to_le_bytes());
            }
            DType::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    for &y in &set.labels {
        out.extend_from_slice(&y.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_embedding<T: Scalar>(bytes: &[u8], modality_name: &str) -> Result<EmbeddingSet<T>, FormatError> {
    let available = bytes.len() as u64;
    if bytes.len() < 4 {
        if !bytes.is_empty() && MAGIC.starts_with(bytes) {
            return Err(FormatError::Truncated {
                expected: HEADER_LEN as u64,
                found: available,
            });
        }
        let mut found = [0u8; 4];
        found[..bytes.len()].copy_from_slice(bytes);
        return Err(FormatError::BadMagic { found });
    }
    if &bytes[..4] != MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        return Err(FormatError::BadMagic { found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN as u64,
            found: available,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as u64;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let dtype = DType::from_tag(bytes[20]).ok_or(FormatError::UnknownDType(bytes[20]))?;

    let expected = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(dtype.size() as u64))
        .and_then(|n| n.checked_add(count.checked_mul(4)?))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .unwrap_or(u64::MAX);
    if available < expected {
        return Err(FormatError::Truncated {
            expected,
            found: available,
        });
    }
    if available > expected {
        return Err(FormatError::TrailingBytes(available - expected));
    }

    let (dim, count) = (dim as usize, count as usize);
    let payload = &bytes[HEADER_LEN..];
    let values_len = count * dim * dtype.size();
    let mut values = Vec::with_capacity(count * dim);
    match dtype {
        DType::F32 => {
            for chunk in payload[..values_len].chunks_exact(4) {
                values.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
        }
        DType::F64 => {
            for chunk in payload[..values_len].chunks_exact(8) {
                values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
    }
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::NonFinite {
            row: pos / dim.max(1),
            col: pos % dim.max(1),
        });
    }
    let labels = payload[values_len..]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let data = Matrix::from_vec(count, dim, values.into_iter().map(T::of).collect())
        .expect("length checked against header");
    Ok(EmbeddingSet {
        modality_name: modality_name.to_string(),
        data,
        labels,
    })
}

/// Writes `set` in its native dtype. Nothing is written if validation fails.
pub fn write_embedding_file<T: Scalar>(set: &EmbeddingSet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_embedding(set, T::DTYPE)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads an `EMBD` file; the modality name is taken from the file stem.
pub fn read_embedding_file<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingSet<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("modality");
    decode_embedding(&bytes, name).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}
