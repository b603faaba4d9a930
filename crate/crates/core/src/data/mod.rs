//! Multi-modal embedding datasets and the synthetic set being optimized.

mod corpus;
mod embd;
mod manifest;

pub use corpus::{generate_corpus, generate_corpus_splits, CorpusParams};
pub use embd::{decode_embedding, encode_embedding, read_embedding_file, write_embedding_file};
pub use manifest::{load_dataset, save_dataset, DatasetManifest, ModalityEntry, MANIFEST_VERSION};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// N×D embeddings of a single modality with one label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet<T> {
    pub modality_name: String,
    pub data: Matrix<T>,
    pub labels: Vec<u32>,
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn new(modality_name: impl Into<String>, data: Matrix<T>, labels: Vec<u32>) -> Result<Self> {
        let set = EmbeddingSet {
            modality_name: modality_name.into(),
            data,
            labels,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.data.rows() {
            return Err(Error::InvalidDataset(format!(
                "{}: {} labels for {} rows",
                self.modality_name,
                self.labels.len(),
                self.data.rows()
            )));
        }
        if self.data.cols() == 0 {
            return Err(Error::InvalidDataset(format!(
                "{}: zero embedding dimension",
                self.modality_name
            )));
        }
        if let Some(pos) = self.data.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "{}: non-finite value at row {}, column {}",
                self.modality_name,
                pos / self.data.cols(),
                pos % self.data.cols()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.data.cols()
    }

    pub fn count(&self) -> usize {
        self.data.rows()
    }
}

/// Row-aligned embeddings of several modalities sharing a label vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedMultiModalDataset<T> {
    modalities: Vec<EmbeddingSet<T>>,
    num_classes: usize,
    class_names: Vec<String>,
    class_rows: Vec<Vec<usize>>,
}

impl<T: Scalar> PairedMultiModalDataset<T> {
    /// Validates pairing (equal counts, identical labels, shared dim) and class coverage.
    ///
    /// Single-modality datasets are accepted so that uni-modal runs remain possible;
    /// cross/joint terms then require zero weight.
    pub fn new(modalities: Vec<EmbeddingSet<T>>, num_classes: usize, class_names: Vec<String>) -> Result<Self> {
        let first = modalities
            .first()
            .ok_or_else(|| Error::InvalidDataset("no modalities".into()))?;
        if num_classes == 0 {
            return Err(Error::InvalidDataset("num_classes must be positive".into()));
        }
        if class_names.len() != num_classes {
            return Err(Error::InvalidDataset(format!(
                "{} class names for {} classes",
                class_names.len(),
                num_classes
            )));
        }
        for m in &modalities {
            m.validate()?;
            if m.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: m.dim(),
                });
            }
            if m.count() != first.count() || m.labels != first.labels {
                return Err(Error::InvalidDataset(format!(
                    "modality {} is not row-aligned with {} (counts or labels differ)",
                    m.modality_name, first.modality_name
                )));
            }
        }
        let mut class_rows = vec![Vec::new(); num_classes];
        for (i, &y) in first.labels.iter().enumerate() {
            let y = y as usize;
            if y >= num_classes {
                return Err(Error::InvalidDataset(format!(
                    "label {y} at row {i} outside [0, {num_classes})"
                )));
            }
            class_rows[y].push(i);
        }
        if let Some(c) = class_rows.iter().position(Vec::is_empty) {
            return Err(Error::InvalidDataset(format!("class {c} has no samples")));
        }
        Ok(PairedMultiModalDataset {
            modalities,
            num_classes,
            class_names,
            class_rows,
        })
    }

    pub fn modalities(&self) -> &[EmbeddingSet<T>] {
        &self.modalities
    }

    pub fn modality(&self, m: usize) -> &EmbeddingSet<T> {
        &self.modalities[m]
    }

    pub fn modality_count(&self) -> usize {
        self.modalities.len()
    }

    pub fn modality_names(&self) -> Vec<String> {
        self.modalities.iter().map(|m| m.modality_name.clone()).collect()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn dim(&self) -> usize {
        self.modalities[0].dim()
    }

    pub fn count(&self) -> usize {
        self.modalities[0].count()
    }

    pub fn labels(&self) -> &[u32] {
        &self.modalities[0].labels
    }

    /// Row indices of class `c`, in ascending order.
    pub fn class_rows(&self, c: usize) -> &[usize] {
        &self.class_rows[c]
    }

    /// Per-modality matrices restricted to `rows`.
    pub fn select(&self, rows: &[usize]) -> Vec<Matrix<T>> {
        self.modalities.iter().map(|m| m.data.select_rows(rows)).collect()
    }
}

/// Learnable synthetic embeddings, stored class-major: rows `c*dpc..(c+1)*dpc` belong to class `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSet<T> {
    pub modality_names: Vec<String>,
    pub modalities: Vec<Matrix<T>>,
    labels: Vec<u32>,
    dpc: usize,
    num_classes: usize,
}

impl<T: Scalar> SyntheticSet<T> {
    pub fn new(modality_names: Vec<String>, modalities: Vec<Matrix<T>>, num_classes: usize, dpc: usize) -> Result<Self> {
        if modality_names.len() != modalities.len() || modalities.is_empty() {
            return Err(Error::ModalityCountMismatch {
                expected: modality_names.len(),
                found: modalities.len(),
            });
        }
        let m = num_classes * dpc;
        let dim = modalities[0].cols();
        for mat in &modalities {
            if mat.shape() != (m, dim) {
                return Err(Error::ShapeMismatch {
                    expected: (m, dim),
                    found: mat.shape(),
                });
            }
            if !mat.is_finite() {
                return Err(Error::InvalidDataset("synthetic set contains non-finite values".into()));
            }
        }
        let labels = (0..num_classes)
            .flat_map(|c| std::iter::repeat_n(c as u32, dpc))
            .collect();
        Ok(SyntheticSet {
            modality_names,
            modalities,
            labels,
            dpc,
            num_classes,
        })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn dpc(&self) -> usize {
        self.dpc
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.modalities[0].cols()
    }

    pub fn modality_count(&self) -> usize {
        self.modalities.len()
    }

    pub fn class_row_range(&self, c: usize) -> std::ops::Range<usize> {
        c * self.dpc..(c + 1) * self.dpc
    }

    pub fn is_finite(&self) -> bool {
        self.modalities.iter().all(Matrix::is_finite)
    }

    /// Per-modality embedding sets carrying the synthetic labels.
    pub fn to_embedding_sets(&self) -> Vec<EmbeddingSet<T>> {
        self.modality_names
            .iter()
            .zip(&self.modalities)
            .map(|(name, data)| EmbeddingSet {
                modality_name: name.clone(),
                data: data.clone(),
                labels: self.labels.clone(),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(name: &str, rows: &[[f64; 2]], labels: &[u32]) -> EmbeddingSet<f64> {
        EmbeddingSet::new(name, Matrix::from_rows(rows), labels.to_vec()).unwrap()
    }

    #[test]
    fn rejects_unpaired_modalities() {
        let a = set("a", &[[0.0, 1.0], [1.0, 0.0]], &[0, 1]);
        let v = set("v", &[[1.0, 0.0], [0.0, 1.0]], &[1, 0]);
        let err = PairedMultiModalDataset::new(vec![a, v], 2, vec!["x".into(), "y".into()]).unwrap_err();
        assert!(matches!(err, Error::InvalidDataset(_)));
    }

    #[test]
    fn rejects_empty_class_and_bad_label() {
        let a = set("a", &[[0.0, 1.0], [1.0, 0.0]], &[0, 0]);
        assert!(PairedMultiModalDataset::new(vec![a.clone()], 2, vec!["x".into(), "y".into()]).is_err());
        let b = set("a", &[[0.0, 1.0], [1.0, 0.0]], &[0, 2]);
        assert!(PairedMultiModalDataset::new(vec![b], 2, vec!["x".into(), "y".into()]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let r = EmbeddingSet::new("a", Matrix::from_rows(&[[f64::NAN, 0.0]]), vec![0]);
        assert!(r.is_err());
    }

    #[test]
    fn synthetic_labels_are_class_major() {
        let s = SyntheticSet::new(vec!["a".into()], vec![Matrix::<f64>::zeros(6, 2)], 3, 2).unwrap();
        assert_eq!(s.labels(), &[0, 0, 1, 1, 2, 2]);
        assert_eq!(s.class_row_range(1), 2..4);
    }
}
