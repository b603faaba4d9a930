//! Condensation of paired multi-modal embedding datasets by characteristic
//! function matching, with linear-probe and retrieval evaluation.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`, which is what the CLI uses.

pub mod alignment;
pub mod cf;
pub mod condense;
pub mod data;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod mmd;
pub mod numeric;
pub mod overrides;
pub mod scalar;
mod trig;

pub use alignment::{LossBreakdown, LossWeights};
pub use error::{Error, FormatError, Result};
pub use matrix::Matrix;
pub use scalar::{DType, Scalar};

pub type Matrix64 = matrix::Matrix<f64>;
pub type Matrix32 = matrix::Matrix<f32>;
pub type EmbeddingSet64 = data::EmbeddingSet<f64>;
pub type EmbeddingSet32 = data::EmbeddingSet<f32>;
pub type Dataset64 = data::PairedMultiModalDataset<f64>;
pub type Dataset32 = data::PairedMultiModalDataset<f32>;
pub type SyntheticSet64 = data::SyntheticSet<f64>;
pub type SyntheticSet32 = data::SyntheticSet<f32>;
pub type FrequencyBatch64 = cf::FrequencyBatch<f64>;
