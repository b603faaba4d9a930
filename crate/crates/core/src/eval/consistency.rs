//! How well a synthetic set preserves row-level pairing between modalities.

use crate::data::{PairedMultiModalDataset, SyntheticSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{dot, norm};
use crate::scalar::Scalar;

/// Mean cosine similarity between matching rows of `a` and `b`. Rows with a zero
/// vector contribute 0.
pub fn mean_paired_cosine<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, rows: impl IntoIterator<Item = usize>) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for i in rows {
        let (x, y) = (a.row(i), b.row(i));
        let denom = norm(x) * norm(y);
        if denom > T::zero() {
            total += (dot(x, y) / denom).to_f64_lossy();
        }
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Per class: `|mean paired cosine (real) - mean paired cosine (synthetic)|`,
/// averaged over unordered modality pairs. A class with one real and one
/// synthetic sample scores 0.
pub fn cross_modal_consistency<T: Scalar>(real: &PairedMultiModalDataset<T>, syn: &SyntheticSet<T>) -> Result<Vec<f64>> {
    let m = real.modality_count();
    if m < 2 {
        return Err(Error::InvalidDataset("cross-modal consistency needs at least two modalities".into()));
    }
    if syn.modality_count() != m {
        return Err(Error::ModalityCountMismatch {
            expected: m,
            found: syn.modality_count(),
        });
    }
    if syn.num_classes() != real.num_classes() {
        return Err(Error::InvalidDataset(format!(
            "synthetic set has {} classes, real data has {}",
            syn.num_classes(),
            real.num_classes()
        )));
    }
    if syn.dim() != real.dim() {
        return Err(Error::DimensionMismatch {
            expected: real.dim(),
            found: syn.dim(),
        });
    }
    let mut out = Vec::with_capacity(real.num_classes());
    for c in 0..real.num_classes() {
        let rows = real.class_rows(c);
        let range = syn.class_row_range(c);
        if rows.len() <= 1 && range.len() <= 1 {
            out.push(0.0);
            continue;
        }
        let mut total = 0.0;
        let mut pairs = 0usize;
        for i in 0..m {
            for j in i + 1..m {
                let r = mean_paired_cosine(&real.modality(i).data, &real.modality(j).data, rows.iter().copied());
                let s = mean_paired_cosine(&syn.modalities[i], &syn.modalities[j], range.clone());
                total += (r - s).abs();
                pairs += 1;
            }
        }
        out.push(total / pairs as f64);
    }
    Ok(out)
}
