use serde::{Deserialize, Serialize};

use crate::alignment::{CrossMode, LossWeights};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    Random,
    Herding,
}

/// Uni-modal distribution distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Cfd,
    Mmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealSampling {
    /// Per-class shuffled passes; a batch never repeats a row within a pass.
    WithoutReplacement,
    WithReplacement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CondenseConfig {
    pub dpc: usize,
    pub iterations: usize,
    pub syn_lr: f64,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub real_batch: usize,
    pub syn_batch: usize,
    pub real_sampling: RealSampling,
    pub freq_count: usize,
    /// `None` selects `1 / median pairwise distance` of a real subsample.
    pub sigma_t: Option<f64>,
    pub resample_freqs: bool,
    pub cfd_amplitude_weight: f64,
    pub cfd_phase_weight: f64,
    pub distance: Distance,
    /// `None` selects the median pairwise distance.
    pub mmd_bandwidth: Option<f64>,
    pub cross_mode: CrossMode,
    pub weights: LossWeights,
    pub init: InitMethod,
    pub seed: u64,
    /// Evaluate the full-data objective every `eval_every` iterations (0 disables).
    pub eval_every: usize,
    /// Global L2 gradient clip; `None` disables.
    pub grad_clip: Option<f64>,
    /// L2-normalize every real embedding row before condensation.
    pub normalize: bool,
    pub median_subsample: usize,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        CondenseConfig {
            dpc: 10,
            iterations: 30,
            syn_lr: 0.5,
            optimizer: OptimizerKind::SgdMomentum,
            momentum: 0.5,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            real_batch: 128,
            syn_batch: 32,
            real_sampling: RealSampling::WithoutReplacement,
            freq_count: 1024,
            sigma_t: None,
            resample_freqs: true,
            cfd_amplitude_weight: 1.0,
            cfd_phase_weight: 1.0,
            distance: Distance::Cfd,
            mmd_bandwidth: None,
            cross_mode: CrossMode::Cosine,
            weights: LossWeights::default(),
            init: InitMethod::Herding,
            seed: 0,
            eval_every: 10,
            grad_clip: Some(10.0),
            normalize: false,
            median_subsample: 512,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(key, "must be finite and positive"))
    }
}

impl CondenseConfig {
    pub fn validate(&self, num_classes: usize, modality_count: usize) -> Result<()> {
        for (key, v) in [
            ("dpc", self.dpc),
            ("iterations", self.iterations),
            ("real_batch", self.real_batch),
            ("syn_batch", self.syn_batch),
            ("freq_count", self.freq_count),
        ] {
            if v == 0 {
                return Err(Error::config(key, "must be positive"));
            }
        }
        if self.syn_batch > self.dpc * num_classes {
            return Err(Error::config(
                "syn_batch",
                format!("{} exceeds dpc * num_classes = {}", self.syn_batch, self.dpc * num_classes),
            ));
        }
        positive("syn_lr", self.syn_lr)?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", "must lie in [0, 1)"));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::config("adam_betas", "must lie in [0, 1)"));
        }
        positive("adam_eps", self.adam_eps)?;
        if let Some(s) = self.sigma_t {
            positive("sigma_t", s)?;
        }
        if let Some(b) = self.mmd_bandwidth {
            positive("mmd_bandwidth", b)?;
        }
        if let Some(c) = self.grad_clip {
            positive("grad_clip", c)?;
        }
        for (key, v) in [
            ("cfd_amplitude_weight", self.cfd_amplitude_weight),
            ("cfd_phase_weight", self.cfd_phase_weight),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be finite and non-negative"));
            }
        }
        if self.median_subsample < 2 {
            return Err(Error::config("median_subsample", "must be at least 2"));
        }
        self.weights.validate_for_modalities(modality_count)
    }
}
