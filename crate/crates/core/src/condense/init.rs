//! Selection of real rows used as the synthetic starting point (and as baselines).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{PairedMultiModalDataset, SyntheticSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::dot;
use crate::scalar::Scalar;

fn check_counts<T: Scalar>(dataset: &PairedMultiModalDataset<T>, dpc: usize) -> Result<()> {
    if dpc == 0 {
        return Err(Error::config("dpc", "must be positive"));
    }
    for c in 0..dataset.num_classes() {
        let available = dataset.class_rows(c).len();
        if available < dpc {
            return Err(Error::InsufficientData {
                class: c,
                available,
                required: dpc,
            });
        }
    }
    Ok(())
}

/// Builds a synthetic set from per-class row selections (same rows in every modality).
pub fn synthetic_from_rows<T: Scalar>(dataset: &PairedMultiModalDataset<T>, per_class: &[Vec<usize>], dpc: usize) -> Result<SyntheticSet<T>> {
    let rows: Vec<usize> = per_class.iter().flatten().copied().collect();
    SyntheticSet::new(dataset.modality_names(), dataset.select(&rows), dataset.num_classes(), dpc)
}

/// Per-class uniform sample of `dpc` paired rows.
pub fn random_rows<T: Scalar>(dataset: &PairedMultiModalDataset<T>, dpc: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_counts(dataset, dpc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..dataset.num_classes())
        .map(|c| {
            let rows = dataset.class_rows(c);
            sample(&mut rng, rows.len(), dpc).into_iter().map(|i| rows[i]).collect()
        })
        .collect())
}

pub fn init_random<T: Scalar>(dataset: &PairedMultiModalDataset<T>, dpc: usize, seed: u64) -> Result<SyntheticSet<T>> {
    let rows = random_rows(dataset, dpc, seed)?;
    synthetic_from_rows(dataset, &rows, dpc)
}

/// Greedy herding over the rows of `features`, returning local row indices in
/// selection order.
///
/// `w` starts at the mean `mu`; each step picks the unselected row maximizing
/// `<w, x>` (lowest index on ties) and updates `w += mu - x`.
pub fn herding_indices<T: Scalar>(features: &Matrix<T>, k: usize) -> Vec<usize> {
    let mu = features.col_means();
    let mut w = mu.clone();
    let mut selected = vec![false; features.rows()];
    let mut order = Vec::with_capacity(k);
    for _ in 0..k.min(features.rows()) {
        let mut best: Option<(usize, T)> = None;
        for (i, x) in features.iter_rows().enumerate() {
            if selected[i] {
                continue;
            }
            let score = dot(&w, x);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let (i, _) = best.expect("fewer rows than requested");
        selected[i] = true;
        order.push(i);
        for ((wj, &mj), &xj) in w.iter_mut().zip(&mu).zip(features.row(i)) {
            *wj += mj - xj;
        }
    }
    order
}

/// Herding on the concatenation of all modalities, so the chosen rows stay paired.
pub fn herding_rows<T: Scalar>(dataset: &PairedMultiModalDataset<T>, dpc: usize) -> Result<Vec<Vec<usize>>> {
    check_counts(dataset, dpc)?;
    Ok((0..dataset.num_classes())
        .map(|c| {
            let rows = dataset.class_rows(c);
            let parts = dataset.select(rows);
            let refs: Vec<&Matrix<T>> = parts.iter().collect();
            let features = Matrix::hconcat(&refs);
            herding_indices(&features, dpc).into_iter().map(|i| rows[i]).collect()
        })
        .collect())
}

/// Herding is deterministic; `_seed` is accepted for interface symmetry with [`init_random`].
pub fn init_herding<T: Scalar>(dataset: &PairedMultiModalDataset<T>, dpc: usize, _seed: u64) -> Result<SyntheticSet<T>> {
    let rows = herding_rows(dataset, dpc)?;
    synthetic_from_rows(dataset, &rows, dpc)
}
