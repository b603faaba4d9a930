//! Runs selection baselines and condensation methods through the same probe
//! and retrieval evaluation.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::probe::{train_linear_probe, LabeledFeatures, ProbeConfig};
use super::retrieval::{paired_retrieval, RetrievalScores, DEFAULT_KS, DEFAULT_RIDGE};
use crate::condense::{self, l2_normalize, CondenseConfig, Distance, InitMethod};
use crate::data::{PairedMultiModalDataset, SyntheticSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub const CSV_HEADER: &str =
    "method,dpc,seed,probe_accuracy,recall_a2t@1,recall_a2t@5,recall_a2t@10,recall_t2a@1,recall_t2a@5,recall_t2a@10";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    Herding,
    MmdCondense,
    CfdCondense,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Random, Method::Herding, Method::MmdCondense, Method::CfdCondense];

    pub fn name(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Herding => "herding",
            Method::MmdCondense => "mmd_condense",
            Method::CfdCondense => "cfd_condense",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config("method", format!("unknown method `{s}` (expected random, herding, mmd_condense or cfd_condense)")))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Template for both condensation methods; `dpc`, `seed` and `distance`
    /// are set per cell and `init` is kept.
    pub condense: CondenseConfig,
    pub probe: ProbeConfig,
    /// Ridge penalty of the retrieval heads; `None` uses the library default.
    pub ridge: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub dpc: usize,
    pub seed: u64,
    pub probe_accuracy: f64,
    pub recall_a2t: Vec<f64>,
    pub recall_t2a: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub dpc: usize,
    pub probe_accuracy_mean: f64,
    pub probe_accuracy_std: f64,
    pub recall_a2t_mean: Vec<f64>,
    pub recall_t2a_mean: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTraceSummary {
    pub method: String,
    pub dpc: usize,
    pub seed: u64,
    pub iterations: usize,
    pub initial_total: f64,
    pub final_total: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub full_data_accuracy_mean: f64,
    pub full_data_accuracy_std: f64,
    pub full_data_recall_a2t: Vec<f64>,
    pub full_data_recall_t2a: Vec<f64>,
    pub rows: Vec<EvalRow>,
    pub summaries: Vec<MethodSummary>,
    pub loss_traces: Vec<LossTraceSummary>,
}

/// Mean and sample standard deviation (0 for fewer than two values).
fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn mean_columns(vectors: &[&Vec<f64>]) -> Vec<f64> {
    let len = vectors.first().map_or(0, |v| v.len());
    (0..len)
        .map(|k| vectors.iter().map(|v| v[k]).sum::<f64>() / vectors.len() as f64)
        .collect()
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{},{},{}", row.method, row.dpc, row.seed, row.probe_accuracy);
            for v in row.recall_a2t.iter().chain(&row.recall_t2a) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Accuracies and recalls in [0, 1], std non-negative, recall non-decreasing in K.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        let monotone = |r: &[f64]| r.windows(2).all(|w| w[0] <= w[1]);
        if !in_unit(self.full_data_accuracy_mean) || !(self.full_data_accuracy_std >= 0.0) {
            return Err("full-data accuracy out of range".into());
        }
        for row in &self.rows {
            let recalls = row.recall_a2t.iter().chain(&row.recall_t2a);
            if !in_unit(row.probe_accuracy) || !recalls.clone().all(|&v| in_unit(v)) {
                return Err(format!("{} dpc={} seed={}: value out of [0, 1]", row.method, row.dpc, row.seed));
            }
            if !monotone(&row.recall_a2t) || !monotone(&row.recall_t2a) {
                return Err(format!("{} dpc={} seed={}: recall decreases with K", row.method, row.dpc, row.seed));
            }
        }
        for s in &self.summaries {
            if !in_unit(s.probe_accuracy_mean) || !(s.probe_accuracy_std >= 0.0) {
                return Err(format!("{} dpc={}: summary out of range", s.method, s.dpc));
            }
        }
        Ok(())
    }

    pub fn summary(&self, method: &str, dpc: usize) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method && s.dpc == dpc)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn summarize(&mut self) {
        let mut keys: Vec<(String, usize)> = Vec::new();
        for row in &self.rows {
            if !keys.iter().any(|(m, d)| *m == row.method && *d == row.dpc) {
                keys.push((row.method.clone(), row.dpc));
            }
        }
        self.summaries = keys
            .into_iter()
            .map(|(method, dpc)| {
                let rows: Vec<&EvalRow> = self.rows.iter().filter(|r| r.method == method && r.dpc == dpc).collect();
                let accs: Vec<f64> = rows.iter().map(|r| r.probe_accuracy).collect();
                let (mean, std) = mean_std(&accs);
                MethodSummary {
                    probe_accuracy_mean: mean,
                    probe_accuracy_std: std,
                    recall_a2t_mean: mean_columns(&rows.iter().map(|r| &r.recall_a2t).collect::<Vec<_>>()),
                    recall_t2a_mean: mean_columns(&rows.iter().map(|r| &r.recall_t2a).collect::<Vec<_>>()),
                    method,
                    dpc,
                }
            })
            .collect();
    }
}

/// Probe accuracy and paired retrieval for one training set.
fn score<T: Scalar>(
    train: LabeledFeatures<T>,
    train_pair: (&Matrix<T>, &Matrix<T>),
    test: &PairedMultiModalDataset<T>,
    config: &CompareConfig,
    seed: u64,
) -> Result<(f64, RetrievalScores)> {
    let probe = ProbeConfig {
        seed,
        ..config.probe.clone()
    };
    let test_features = LabeledFeatures::from_dataset(test, probe.input)?;
    let accuracy = train_linear_probe(&train, &test_features, &probe)?;
    let retrieval = paired_retrieval(
        train_pair.0,
        train_pair.1,
        &test.modality(0).data,
        &test.modality(1).data,
        &DEFAULT_KS,
        config.ridge.unwrap_or(DEFAULT_RIDGE),
    )?;
    Ok((accuracy, retrieval))
}

fn score_synthetic<T: Scalar>(
    syn: &SyntheticSet<T>,
    test: &PairedMultiModalDataset<T>,
    config: &CompareConfig,
    seed: u64,
) -> Result<(f64, RetrievalScores)> {
    let features = LabeledFeatures::from_synthetic(syn, config.probe.input)?;
    score(features, (&syn.modalities[0], &syn.modalities[1]), test, config, seed)
}

fn check_pair<T: Scalar>(train: &PairedMultiModalDataset<T>, test: &PairedMultiModalDataset<T>) -> Result<()> {
    if train.modality_count() < 2 {
        return Err(Error::InvalidDataset("evaluation needs at least two modalities".into()));
    }
    if test.modality_count() != train.modality_count() {
        return Err(Error::ModalityCountMismatch {
            expected: train.modality_count(),
            found: test.modality_count(),
        });
    }
    if test.dim() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    if test.num_classes() != train.num_classes() {
        return Err(Error::InvalidDataset(format!(
            "train has {} classes, test has {}",
            train.num_classes(),
            test.num_classes()
        )));
    }
    Ok(())
}

struct Cell {
    row: EvalRow,
    trace: Option<LossTraceSummary>,
}

fn run_cell<T: Scalar>(
    train: &PairedMultiModalDataset<T>,
    test: &PairedMultiModalDataset<T>,
    config: &CompareConfig,
    method: Method,
    dpc: usize,
    seed: u64,
) -> Result<Cell> {
    let mut cc = CondenseConfig {
        dpc,
        seed,
        normalize: false,
        ..config.condense.clone()
    };
    cc.syn_batch = cc.syn_batch.min(dpc * train.num_classes());
    let (syn, trace) = match method {
        Method::Random => (condense::initialize(train, &CondenseConfig { init: InitMethod::Random, ..cc })?, None),
        Method::Herding => (condense::initialize(train, &CondenseConfig { init: InitMethod::Herding, ..cc })?, None),
        Method::MmdCondense | Method::CfdCondense => {
            cc.distance = if method == Method::MmdCondense { Distance::Mmd } else { Distance::Cfd };
            let (syn, trace) = condense::condense(train, &cc)?;
            let summary = LossTraceSummary {
                method: method.name().into(),
                dpc,
                seed,
                iterations: trace.iterations.len(),
                initial_total: trace.initial_eval().map_or(f64::NAN, |e| e.breakdown.total),
                final_total: trace.final_eval().map_or(f64::NAN, |e| e.breakdown.total),
            };
            (syn, Some(summary))
        }
    };
    let (accuracy, retrieval) = score_synthetic(&syn, test, config, seed)?;
    Ok(Cell {
        row: EvalRow {
            method: method.name().into(),
            dpc,
            seed,
            probe_accuracy: accuracy,
            recall_a2t: retrieval.a_to_b,
            recall_t2a: retrieval.b_to_a,
        },
        trace,
    })
}

fn maybe_normalize<T: Scalar>(
    train: &PairedMultiModalDataset<T>,
    test: &PairedMultiModalDataset<T>,
    normalize: bool,
) -> Result<Option<(PairedMultiModalDataset<T>, PairedMultiModalDataset<T>)>> {
    if normalize {
        Ok(Some((l2_normalize(train)?, l2_normalize(test)?)))
    } else {
        Ok(None)
    }
}

fn full_data_reference<T: Scalar>(
    train: &PairedMultiModalDataset<T>,
    test: &PairedMultiModalDataset<T>,
    config: &CompareConfig,
    seeds: &[u64],
    report: &mut EvalReport,
) -> Result<()> {
    let full: Vec<(f64, RetrievalScores)> = seeds
        .par_iter()
        .map(|&seed| {
            let features = LabeledFeatures::from_dataset(train, config.probe.input)?;
            score(features, (&train.modality(0).data, &train.modality(1).data), test, config, seed)
        })
        .collect::<Result<_>>()?;
    let accs: Vec<f64> = full.iter().map(|f| f.0).collect();
    (report.full_data_accuracy_mean, report.full_data_accuracy_std) = mean_std(&accs);
    // Retrieval heads are seed independent, so any seed's scores serve.
    report.full_data_recall_a2t = full[0].1.a_to_b.clone();
    report.full_data_recall_t2a = full[0].1.b_to_a.clone();
    Ok(())
}

/// Every (method, dpc, seed) cell: build the set, train a probe on it, score
/// retrieval, then aggregate. Rows are ordered method, dpc, seed as given.
pub fn compare_methods<T: Scalar>(
    train: &PairedMultiModalDataset<T>,
    test: &PairedMultiModalDataset<T>,
    dpc_list: &[usize],
    methods: &[Method],
    seeds: &[u64],
    config: &CompareConfig,
) -> Result<EvalReport> {
    if methods.is_empty() {
        return Err(Error::config("methods", "at least one method is required"));
    }
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    if dpc_list.is_empty() || dpc_list.contains(&0) {
        return Err(Error::config("dpc", "need one or more positive values"));
    }
    config.probe.validate()?;
    check_pair(train, test)?;
    let normalized = maybe_normalize(train, test, config.condense.normalize)?;
    let (train, test) = match &normalized {
        Some((a, b)) => (a, b),
        None => (train, test),
    };

    let mut cells = Vec::new();
    for &method in methods {
        for &dpc in dpc_list {
            for &seed in seeds {
                cells.push((method, dpc, seed));
            }
        }
    }
    let results: Vec<Cell> = cells
        .par_iter()
        .map(|&(method, dpc, seed)| run_cell(train, test, config, method, dpc, seed))
        .collect::<Result<_>>()?;

    let mut report = EvalReport {
        ks: DEFAULT_KS.to_vec(),
        seeds: seeds.to_vec(),
        ..EvalReport::default()
    };
    full_data_reference(train, test, config, seeds, &mut report)?;
    for cell in results {
        report.rows.push(cell.row);
        report.loss_traces.extend(cell.trace);
    }
    report.summarize();
    Ok(report)
}

/// Scores an existing synthetic set (for example a saved checkpoint) under
/// the label `method`, one row per probe seed.
pub fn evaluate_synthetic<T: Scalar>(
    train: &PairedMultiModalDataset<T>,
    syn: &SyntheticSet<T>,
    test: &PairedMultiModalDataset<T>,
    method: &str,
    seeds: &[u64],
    config: &CompareConfig,
) -> Result<EvalReport> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    config.probe.validate()?;
    check_pair(train, test)?;
    if syn.modality_count() != train.modality_count() || syn.dim() != train.dim() || syn.num_classes() != train.num_classes() {
        return Err(Error::InvalidDataset("synthetic set does not match the training data layout".into()));
    }
    let normalized = maybe_normalize(train, test, config.condense.normalize)?;
    let (train, test) = match &normalized {
        Some((a, b)) => (a, b),
        None => (train, test),
    };
    let rows: Vec<EvalRow> = seeds
        .par_iter()
        .map(|&seed| {
            let (accuracy, retrieval) = score_synthetic(syn, test, config, seed)?;
            Ok(EvalRow {
                method: method.into(),
                dpc: syn.dpc(),
                seed,
                probe_accuracy: accuracy,
                recall_a2t: retrieval.a_to_b,
                recall_t2a: retrieval.b_to_a,
            })
        })
        .collect::<Result<_>>()?;
    let mut report = EvalReport {
        ks: DEFAULT_KS.to_vec(),
        seeds: seeds.to_vec(),
        rows,
        ..EvalReport::default()
    };
    full_data_reference(train, test, config, seeds, &mut report)?;
    report.summarize();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("dm".parse::<Method>().is_err());
    }

    #[test]
    fn mean_std_matches_hand_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }
}
