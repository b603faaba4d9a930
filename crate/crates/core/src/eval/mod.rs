//! Quality measures for condensed sets and the method-comparison harness.

mod compare;
mod consistency;
mod probe;
mod retrieval;

pub use compare::{
    compare_methods, evaluate_synthetic, CompareConfig, EvalReport, EvalRow, LossTraceSummary, Method, MethodSummary,
    CSV_HEADER,
};
pub use consistency::{cross_modal_consistency, mean_paired_cosine};
pub use probe::{fit_linear_probe, train_linear_probe, LabeledFeatures, LinearProbe, ProbeConfig, ProbeInput};
pub use retrieval::{
    paired_retrieval, rank_gallery, recall_at_k, recall_at_ks, Relevance, RetrievalScores, RidgeHead, DEFAULT_KS,
    DEFAULT_RIDGE,
};
