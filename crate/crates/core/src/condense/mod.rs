//! The condensation loop: per-class batched matching of real and synthetic
//! embeddings under the weighted uni/cross/joint objective.

mod checkpoint;
mod config;
mod init;
mod optimizer;

pub use checkpoint::{load_checkpoint, load_checkpoint_meta, save_checkpoint, CheckpointMeta, META_FILE, TIMING_FILE, TRACE_FILE};
pub use config::{CondenseConfig, Distance, InitMethod, OptimizerKind, RealSampling};
pub use init::{herding_indices, herding_rows, init_herding, init_random, random_rows, synthetic_from_rows};
pub use optimizer::RowOptimizer;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{total_loss_with, DegeneratePolicy, LossBreakdown, LossOptions, UniDistance};
use crate::cf::{sample_frequencies, CfdWeights, FrequencyBatch};
use crate::data::{EmbeddingSet, PairedMultiModalDataset, SyntheticSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{mix_seed, norm};
use crate::scalar::Scalar;

const STREAM_INIT: u64 = 10;
const STREAM_MEDIAN: u64 = 11;
const STREAM_FREQS: u64 = 12;
const STREAM_BATCHES: u64 = 13;
const STREAM_EVAL: u64 = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub breakdown: LossBreakdown,
    /// Seconds since the loop started. Kept out of the trace file so that
    /// identical runs produce identical traces; checkpoints store it separately.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

/// Objective over the full per-class real data on a fixed frequency batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    /// Number of completed iterations when evaluated (0 = initialization).
    pub iteration: usize,
    pub breakdown: LossBreakdown,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CondenseTrace {
    pub iterations: Vec<IterationRecord>,
    pub evals: Vec<EvalRecord>,
    pub sigma_t: f64,
    pub mmd_bandwidth: f64,
    pub checkpoint_paths: Vec<String>,
}

impl CondenseTrace {
    pub fn initial_eval(&self) -> Option<&EvalRecord> {
        self.evals.first()
    }

    pub fn final_eval(&self) -> Option<&EvalRecord> {
        self.evals.last()
    }
}

/// L2-normalizes every row; zero rows are left unchanged.
pub fn l2_normalize<T: Scalar>(dataset: &PairedMultiModalDataset<T>) -> Result<PairedMultiModalDataset<T>> {
    let sets = dataset
        .modalities()
        .iter()
        .map(|set| {
            let mut data = set.data.clone();
            for i in 0..data.rows() {
                let n = norm(data.row(i));
                if n > T::zero() {
                    data.row_mut(i).iter_mut().for_each(|v| *v /= n);
                }
            }
            EmbeddingSet::new(set.modality_name.clone(), data, set.labels.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    PairedMultiModalDataset::new(sets, dataset.num_classes(), dataset.class_names().to_vec())
}

/// Median pairwise distance pooled over modalities on a shared row subsample.
pub fn median_scale<T: Scalar>(dataset: &PairedMultiModalDataset<T>, subsample: usize, seed: u64) -> Result<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dataset.count();
    let rows: Vec<usize> = if n > subsample {
        let mut idx = rand::seq::index::sample(&mut rng, n, subsample).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..n).collect()
    };
    let mut pooled = Vec::new();
    for set in dataset.modalities() {
        let pts = set.data.select_rows(&rows);
        for i in 0..pts.rows() {
            for j in i + 1..pts.rows() {
                pooled.push(crate::numeric::squared_distance(pts.row(i), pts.row(j)).sqrt());
            }
        }
    }
    if pooled.is_empty() {
        return Err(Error::config("sigma_t", "need at least two rows for the median heuristic"));
    }
    let med = crate::numeric::median(&mut pooled);
    if med > T::zero() {
        Ok(med)
    } else {
        Err(Error::config("sigma_t", "median pairwise distance is zero; set sigma_t explicitly"))
    }
}

/// Per-class real batch sampler.
struct ClassSampler {
    order: Vec<usize>,
    cursor: usize,
}

impl ClassSampler {
    fn next_batch(&mut self, size: usize, mode: RealSampling, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let n = self.order.len();
        match mode {
            RealSampling::WithReplacement => (0..size).map(|_| self.order[rng.random_range(0..n)]).collect(),
            RealSampling::WithoutReplacement => {
                if size >= n {
                    let mut all = self.order.clone();
                    all.sort_unstable();
                    return all;
                }
                let mut batch = Vec::with_capacity(size);
                while batch.len() < size {
                    if self.cursor == n {
                        self.order.shuffle(rng);
                        self.cursor = 0;
                    }
                    batch.push(self.order[self.cursor]);
                    self.cursor += 1;
                }
                batch
            }
        }
    }
}

struct Objective<T> {
    sigma_t: T,
    bandwidth: T,
    cfd_weights: CfdWeights<T>,
}

impl<T: Scalar> Objective<T> {
    fn options<'a>(&self, config: &CondenseConfig, freqs: &'a FrequencyBatch<T>) -> LossOptions<'a, T> {
        let uni = match config.distance {
            Distance::Cfd => UniDistance::Cfd {
                freqs,
                weights: self.cfd_weights,
            },
            Distance::Mmd => UniDistance::Mmd {
                bandwidth: self.bandwidth,
            },
        };
        LossOptions {
            uni,
            cross_mode: config.cross_mode,
            cross_freqs: Some(freqs),
            degenerate: DegeneratePolicy::Skip,
        }
    }
}

fn class_syn_matrices<T: Scalar>(syn: &SyntheticSet<T>, rows: &[usize]) -> Vec<Matrix<T>> {
    syn.modalities.iter().map(|m| m.select_rows(rows)).collect()
}

fn divergence_term(b: &LossBreakdown) -> &'static str {
    if !b.uni_per_modality.iter().all(|v| v.is_finite()) {
        "uni"
    } else if !b.cross.is_finite() {
        "cross"
    } else if !b.joint.is_finite() {
        "joint"
    } else if !b.total.is_finite() {
        "total"
    } else {
        "gradient"
    }
}

/// Full-data objective for every class, summed in class order.
fn evaluate_objective<T: Scalar>(
    dataset: &PairedMultiModalDataset<T>,
    syn: &SyntheticSet<T>,
    config: &CondenseConfig,
    objective: &Objective<T>,
    freqs: &FrequencyBatch<T>,
) -> Result<LossBreakdown> {
    let per_class = (0..dataset.num_classes())
        .into_par_iter()
        .map(|c| {
            let real = dataset.select(dataset.class_rows(c));
            let rows: Vec<usize> = syn.class_row_range(c).collect();
            let syn_batch = class_syn_matrices(syn, &rows);
            total_loss_with(&real, &syn_batch, &config.weights, objective.options(config, freqs)).map(|o| o.breakdown)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = LossBreakdown::default();
    per_class.iter().for_each(|b| total.accumulate(b));
    Ok(total)
}

/// Builds the initial synthetic set selected by `config.init`.
pub fn initialize<T: Scalar>(dataset: &PairedMultiModalDataset<T>, config: &CondenseConfig) -> Result<SyntheticSet<T>> {
    let seed = mix_seed(config.seed, STREAM_INIT);
    match config.init {
        InitMethod::Random => init_random(dataset, config.dpc, seed),
        InitMethod::Herding => init_herding(dataset, config.dpc, seed),
    }
}

pub fn condense<T: Scalar>(dataset: &PairedMultiModalDataset<T>, config: &CondenseConfig) -> Result<(SyntheticSet<T>, CondenseTrace)> {
    condense_with_observer(dataset, config, |_| {})
}

/// Runs condensation, invoking `observer` after every iteration.
pub fn condense_with_observer<T: Scalar>(
    dataset: &PairedMultiModalDataset<T>,
    config: &CondenseConfig,
    observer: impl FnMut(&IterationRecord),
) -> Result<(SyntheticSet<T>, CondenseTrace)> {
    config.validate(dataset.num_classes(), dataset.modality_count())?;
    let normalized;
    let dataset = if config.normalize {
        normalized = l2_normalize(dataset)?;
        &normalized
    } else {
        dataset
    };
    let init = initialize(dataset, config)?;
    condense_from(dataset, config, init, observer)
}

/// Runs condensation starting from an explicit synthetic set. The dataset is used
/// as given (`config.normalize` is not applied here).
pub fn condense_from<T: Scalar>(
    dataset: &PairedMultiModalDataset<T>,
    config: &CondenseConfig,
    mut syn: SyntheticSet<T>,
    mut observer: impl FnMut(&IterationRecord),
) -> Result<(SyntheticSet<T>, CondenseTrace)> {
    config.validate(dataset.num_classes(), dataset.modality_count())?;
    if syn.num_classes() != dataset.num_classes() || syn.modality_count() != dataset.modality_count() || syn.dim() != dataset.dim() {
        return Err(Error::InvalidDataset("synthetic set does not match the dataset layout".into()));
    }
    let dim = dataset.dim();
    let needs_scale = config.sigma_t.is_none() || config.mmd_bandwidth.is_none();
    let median = if needs_scale {
        Some(median_scale(dataset, config.median_subsample, mix_seed(config.seed, STREAM_MEDIAN))?)
    } else {
        None
    };
    let sigma_t = config
        .sigma_t
        .map(T::of)
        .unwrap_or_else(|| T::one() / median.expect("median computed"));
    let bandwidth = config.mmd_bandwidth.map(T::of).unwrap_or_else(|| median.expect("median computed"));
    let objective = Objective {
        sigma_t,
        bandwidth,
        cfd_weights: CfdWeights {
            amplitude: T::of(config.cfd_amplitude_weight),
            phase: T::of(config.cfd_phase_weight),
        },
    };

    let freq_seed = mix_seed(config.seed, STREAM_FREQS);
    let fixed_freqs = sample_frequencies(dim, config.freq_count, objective.sigma_t, freq_seed)?;
    let eval_freqs = sample_frequencies(dim, config.freq_count, objective.sigma_t, mix_seed(config.seed, STREAM_EVAL))?;

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, STREAM_BATCHES));
    let mut samplers: Vec<ClassSampler> = (0..dataset.num_classes())
        .map(|c| {
            let mut order = dataset.class_rows(c).to_vec();
            order.shuffle(&mut rng);
            ClassSampler { order, cursor: 0 }
        })
        .collect();
    let mut optimizers: Vec<RowOptimizer<T>> = (0..syn.modality_count())
        .map(|_| RowOptimizer::new(config, syn.len(), dim))
        .collect();
    let syn_per_class = config.syn_batch.min(syn.dpc());

    let mut trace = CondenseTrace {
        sigma_t: objective.sigma_t.to_f64_lossy(),
        mmd_bandwidth: objective.bandwidth.to_f64_lossy(),
        ..CondenseTrace::default()
    };
    if config.eval_every > 0 {
        trace.evals.push(EvalRecord {
            iteration: 0,
            breakdown: evaluate_objective(dataset, &syn, config, &objective, &eval_freqs)?,
        });
    }

    for iteration in 0..config.iterations {
        let start = Instant::now();
        let freqs = if config.resample_freqs {
            sample_frequencies(dim, config.freq_count, objective.sigma_t, mix_seed(freq_seed, iteration as u64 + 1))?
        } else {
            fixed_freqs.clone()
        };

        // Batch selection is sequential so the RNG stream is independent of threading.
        let batches: Vec<(Vec<usize>, Vec<usize>)> = (0..dataset.num_classes())
            .map(|c| {
                let real_rows = samplers[c].next_batch(config.real_batch, config.real_sampling, &mut rng);
                let range = syn.class_row_range(c);
                let mut syn_rows: Vec<usize> = rand::seq::index::sample(&mut rng, syn.dpc(), syn_per_class)
                    .into_iter()
                    .map(|i| range.start + i)
                    .collect();
                syn_rows.sort_unstable();
                (real_rows, syn_rows)
            })
            .collect();

        let options = objective.options(config, &freqs);
        let outputs = batches
            .par_iter()
            .map(|(real_rows, syn_rows)| {
                let real = dataset.select(real_rows);
                let syn_batch = class_syn_matrices(&syn, syn_rows);
                total_loss_with(&real, &syn_batch, &config.weights, options)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut breakdown = LossBreakdown::default();
        let mut grad_sq = T::zero();
        for out in &outputs {
            if !out.breakdown.total.is_finite() || !out.grads.iter().all(Matrix::is_finite) {
                return Err(Error::Divergence {
                    iteration,
                    term: divergence_term(&out.breakdown).to_string(),
                });
            }
            breakdown.accumulate(&out.breakdown);
            grad_sq += out.grads.iter().fold(T::zero(), |a, g| a + g.squared_norm());
        }
        let grad_norm = grad_sq.sqrt();
        if !grad_norm.is_finite() {
            return Err(Error::Divergence {
                iteration,
                term: "gradient".into(),
            });
        }
        let clip_scale = match config.grad_clip {
            Some(clip) if grad_norm > T::of(clip) => T::of(clip) / grad_norm,
            _ => T::one(),
        };

        for ((_, syn_rows), out) in batches.iter().zip(&outputs) {
            for (m, grad) in out.grads.iter().enumerate() {
                for (local, &row) in syn_rows.iter().enumerate() {
                    let g: Vec<T> = grad.row(local).iter().map(|&v| v * clip_scale).collect();
                    optimizers[m].step_row(&mut syn.modalities[m], row, &g);
                }
            }
        }
        if !syn.is_finite() {
            return Err(Error::Divergence {
                iteration,
                term: "synthetic update".into(),
            });
        }

        let record = IterationRecord {
            iteration,
            breakdown,
            wall_time_secs: start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE),
        };
        observer(&record);
        trace.iterations.push(record);

        let done = iteration + 1;
        if config.eval_every > 0 && (done % config.eval_every == 0 || done == config.iterations) {
            trace.evals.push(EvalRecord {
                iteration: done,
                breakdown: evaluate_objective(dataset, &syn, config, &objective, &eval_freqs)?,
            });
        }
    }
    Ok((syn, trace))
}
