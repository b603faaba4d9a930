//! Desk-scale paired corpus: Gaussian class clusters with a shared-latent coupling knob.
//!
//! For class `c`, modality `m`, and sample latent `h ~ N(0, I)`:
//!
//! ```text
//! e = mu[m][c] + coupling * Q[m] h + (1 - coupling) * eps,   eps ~ N(0, I)
//! ```
//!
//! `mu[m][c]` has norm `class_separation`; `Q[m]` is orthonormal and built from a
//! basis shared by all modalities plus a modality-specific perturbation, so paired
//! rows have positively aligned embeddings when `coupling > 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingSet, PairedMultiModalDataset};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{mix_seed, norm};
use crate::scalar::Scalar;

const MODALITY_PERTURBATION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    pub num_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub modality_count: usize,
    pub class_separation: f64,
    pub cross_modal_coupling: f64,
    pub seed: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            num_classes: 10,
            per_class: 500,
            dim: 16,
            modality_count: 2,
            class_separation: 2.0,
            cross_modal_coupling: 0.8,
            seed: 0,
        }
    }
}

impl CorpusParams {
    fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("classes", self.num_classes),
            ("per_class", self.per_class),
            ("dim", self.dim),
            ("modalities", self.modality_count),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if !(self.class_separation.is_finite() && self.class_separation >= 0.0) {
            return Err(Error::config("separation", "must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.cross_modal_coupling) {
            return Err(Error::config("coupling", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

struct Structure {
    means: Vec<Vec<Vec<f64>>>,
    projections: Vec<Vec<Vec<f64>>>,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Modified Gram-Schmidt over rows; restarts a row from fresh noise if it collapses.
fn orthonormal_rows(mut rows: Vec<Vec<f64>>, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = rows.len();
    for i in 0..d {
        loop {
            for j in 0..i {
                let proj: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                let basis = rows[j].clone();
                rows[i].iter_mut().zip(&basis).for_each(|(a, b)| *a -= proj * b);
            }
            let n = norm(&rows[i]);
            if n > 1e-8 {
                rows[i].iter_mut().for_each(|a| *a /= n);
                break;
            }
            rows[i] = gaussian_vec(rng, d);
        }
    }
    rows
}

fn build_structure(params: &CorpusParams) -> Structure {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(params.seed, 1));
    let d = params.dim;
    let means = (0..params.modality_count)
        .map(|_| {
            (0..params.num_classes)
                .map(|_| {
                    let g = gaussian_vec(&mut rng, d);
                    let n = norm(&g).max(1e-12);
                    g.iter().map(|v| params.class_separation * v / n).collect()
                })
                .collect()
        })
        .collect();
    let shared: Vec<Vec<f64>> = (0..d).map(|_| gaussian_vec(&mut rng, d)).collect();
    let projections = (0..params.modality_count)
        .map(|_| {
            let rows = shared
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|&v| v + MODALITY_PERTURBATION * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect();
            orthonormal_rows(rows, &mut rng)
        })
        .collect();
    Structure { means, projections }
}

fn sample_split<T: Scalar>(params: &CorpusParams, structure: &Structure, per_class: usize, stream: u64) -> Result<PairedMultiModalDataset<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(params.seed, stream));
    let (d, m, c) = (params.dim, params.modality_count, params.num_classes);
    let n = c * per_class;
    let coupling = params.cross_modal_coupling;
    let mut data: Vec<Vec<T>> = vec![Vec::with_capacity(n * d); m];
    let mut labels = Vec::with_capacity(n);
    for class in 0..c {
        for _ in 0..per_class {
            let latent = gaussian_vec(&mut rng, d);
            for (mi, out) in data.iter_mut().enumerate() {
                let mean = &structure.means[mi][class];
                let proj = &structure.projections[mi];
                for k in 0..d {
                    let shared: f64 = proj[k].iter().zip(&latent).map(|(a, b)| a * b).sum();
                    let noise: f64 = rng.sample(StandardNormal);
                    out.push(T::of(mean[k] + coupling * shared + (1.0 - coupling) * noise));
                }
            }
            labels.push(class as u32);
        }
    }
    let sets = data
        .into_iter()
        .enumerate()
        .map(|(mi, values)| EmbeddingSet::new(format!("mod{mi}"), Matrix::from_vec(n, d, values)?, labels.clone()))
        .collect::<Result<Vec<_>>>()?;
    let names = (0..c).map(|k| format!("class{k}")).collect();
    PairedMultiModalDataset::new(sets, c, names)
}

/// Generates a training corpus. Deterministic in `params.seed`.
pub fn generate_corpus<T: Scalar>(params: &CorpusParams) -> Result<PairedMultiModalDataset<T>> {
    params.validate()?;
    let structure = build_structure(params);
    sample_split(params, &structure, params.per_class, 2)
}

/// Training corpus plus a held-out split drawn from the same class structure.
pub fn generate_corpus_splits<T: Scalar>(
    params: &CorpusParams,
    test_per_class: usize,
) -> Result<(PairedMultiModalDataset<T>, PairedMultiModalDataset<T>)> {
    params.validate()?;
    if test_per_class == 0 {
        return Err(Error::config("test_per_class", "must be positive"));
    }
    let structure = build_structure(params);
    let train = sample_split(params, &structure, params.per_class, 2)?;
    let test = sample_split(params, &structure, test_per_class, 3)?;
    Ok((train, test))
}
