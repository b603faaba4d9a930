//! Softmax linear probe over frozen embeddings.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{PairedMultiModalDataset, SyntheticSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// How modalities are combined into the probe's input vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeInput {
    Single(usize),
    Concat,
    Sum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub input: ProbeInput,
    pub adam_betas: (f64, f64),
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 1000,
            lr: 0.001,
            weight_decay: 1e-4,
            batch_size: 32,
            seed: 0,
            input: ProbeInput::Concat,
            adam_betas: (0.9, 0.999),
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("probe.epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("probe.batch_size", "must be positive"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config("probe.lr", "must be finite and positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::config("probe.weight_decay", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Probe inputs with their labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeatures<T> {
    pub features: Matrix<T>,
    pub labels: Vec<u32>,
    pub num_classes: usize,
}

fn combine<T: Scalar>(mods: &[&Matrix<T>], input: ProbeInput) -> Result<Matrix<T>> {
    match input {
        ProbeInput::Single(m) => mods
            .get(m)
            .map(|x| (*x).clone())
            .ok_or_else(|| Error::config("probe.input", format!("modality {m} out of range"))),
        ProbeInput::Concat => Ok(Matrix::hconcat(mods)),
        ProbeInput::Sum => {
            let mut acc = mods[0].clone();
            for m in &mods[1..] {
                acc.add_scaled(m, T::one());
            }
            Ok(acc)
        }
    }
}

impl<T: Scalar> LabeledFeatures<T> {
    pub fn from_dataset(dataset: &PairedMultiModalDataset<T>, input: ProbeInput) -> Result<Self> {
        let mods: Vec<&Matrix<T>> = dataset.modalities().iter().map(|m| &m.data).collect();
        Ok(LabeledFeatures {
            features: combine(&mods, input)?,
            labels: dataset.labels().to_vec(),
            num_classes: dataset.num_classes(),
        })
    }

    pub fn from_synthetic(syn: &SyntheticSet<T>, input: ProbeInput) -> Result<Self> {
        let mods: Vec<&Matrix<T>> = syn.modalities.iter().collect();
        Ok(LabeledFeatures {
            features: combine(&mods, input)?,
            labels: syn.labels().to_vec(),
            num_classes: syn.num_classes(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// `logits = W x + b`, `W` stored as classes x features.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProbe<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LinearProbe<T> {
    pub fn logits(&self, x: &[T], out: &mut [T]) {
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.bias[c] + crate::numeric::dot(self.weights.row(c), x);
        }
    }

    /// Arg-max class; ties go to the lowest class index.
    pub fn predict(&self, x: &[T]) -> u32 {
        let mut logits = vec![T::zero(); self.bias.len()];
        self.logits(x, &mut logits);
        let mut best = 0;
        for (c, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = c;
            }
        }
        best as u32
    }

    pub fn accuracy(&self, data: &LabeledFeatures<T>) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let correct = data
            .features
            .iter_rows()
            .zip(&data.labels)
            .filter(|(x, &y)| self.predict(x) == y)
            .count();
        correct as f64 / data.len() as f64
    }
}

fn softmax_in_place<T: Scalar>(v: &mut [T]) {
    let max = v.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut sum = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum);
}

/// Multinomial logistic regression trained with mini-batch Adam on cross-entropy
/// (L2 weight decay added to the gradient). Weights start at zero; the seed drives
/// the batch order.
pub fn fit_linear_probe<T: Scalar>(train: &LabeledFeatures<T>, config: &ProbeConfig) -> Result<LinearProbe<T>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidDataset("empty probe training set".into()));
    }
    let mut seen = vec![false; train.num_classes];
    for &y in &train.labels {
        let y = y as usize;
        if y >= train.num_classes {
            return Err(Error::InvalidDataset(format!("probe label {y} out of range")));
        }
        seen[y] = true;
    }
    if let Some(c) = seen.iter().position(|s| !s) {
        warn!("class {c} absent from probe training data");
    }
    let (classes, dim) = (train.num_classes, train.features.cols());
    let mut probe = LinearProbe {
        weights: Matrix::zeros(classes, dim),
        bias: vec![T::zero(); classes],
    };
    let n_params = classes * (dim + 1);
    let mut first = vec![T::zero(); n_params];
    let mut second = vec![T::zero(); n_params];
    let mut grad = vec![T::zero(); n_params];
    let (b1, b2) = (T::of(config.adam_betas.0), T::of(config.adam_betas.1));
    let (lr, wd, eps) = (T::of(config.lr), T::of(config.weight_decay), T::of(1e-8));
    let mut step = 0i32;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut probs = vec![T::zero(); classes];

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let inv_b = T::one() / T::of_usize(batch.len());
            for &i in batch {
                let x = train.features.row(i);
                probe.logits(x, &mut probs);
                softmax_in_place(&mut probs);
                probs[train.labels[i] as usize] -= T::one();
                for (c, &p) in probs.iter().enumerate() {
                    let coef = p * inv_b;
                    let row = &mut grad[c * (dim + 1)..(c + 1) * (dim + 1)];
                    for (g, &xj) in row[..dim].iter_mut().zip(x) {
                        *g += coef * xj;
                    }
                    row[dim] += coef;
                }
            }
            step += 1;
            let c1 = T::one() - b1.powi(step);
            let c2 = T::one() - b2.powi(step);
            for c in 0..classes {
                for j in 0..=dim {
                    let idx = c * (dim + 1) + j;
                    let param = if j < dim { probe.weights.get(c, j) } else { probe.bias[c] };
                    let g = grad[idx] + wd * param;
                    first[idx] = b1 * first[idx] + (T::one() - b1) * g;
                    second[idx] = b2 * second[idx] + (T::one() - b2) * g * g;
                    let update = lr * (first[idx] / c1) / ((second[idx] / c2).sqrt() + eps);
                    if j < dim {
                        probe.weights.set(c, j, param - update);
                    } else {
                        probe.bias[c] = param - update;
                    }
                }
            }
        }
    }
    Ok(probe)
}

/// Trains on `train` and returns top-1 accuracy on `test`.
pub fn train_linear_probe<T: Scalar>(train: &LabeledFeatures<T>, test: &LabeledFeatures<T>, config: &ProbeConfig) -> Result<f64> {
    if train.features.cols() != test.features.cols() {
        return Err(Error::DimensionMismatch {
            expected: train.features.cols(),
            found: test.features.cols(),
        });
    }
    if train.num_classes != test.num_classes {
        return Err(Error::InvalidDataset(format!(
            "train has {} classes, test has {}",
            train.num_classes, test.num_classes
        )));
    }
    let probe = fit_linear_probe(train, config)?;
    Ok(probe.accuracy(test))
}
