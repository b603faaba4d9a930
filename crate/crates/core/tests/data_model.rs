mod common;

use std::fs;

use cfcondense::data::*;
use cfcondense::eval::{train_linear_probe, LabeledFeatures, ProbeConfig, ProbeInput, RidgeHead};
use cfcondense::{DType, Error, FormatError, Matrix};

fn reference_embd_bytes(values: &[f64], dim: u32, labels: &[u32]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"EMBD");
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(labels.len() as u64).to_le_bytes());
    out.push(1u8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

fn sample_set() -> EmbeddingSet<f64> {
    let values = vec![0.5, -1.25, 3.0, 1e-7, 2.0, 0.0, -0.0, 7.5, 1.0 / 3.0, -2.5, 6.02e23, 4.0];
    EmbeddingSet::new("audio", Matrix::from_vec(3, 4, values).unwrap(), vec![0, 1, 1]).unwrap()
}

#[test]
fn three_by_four_float64_matches_reference_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let set = sample_set();
    let path = dir.path().join("audio.embd");
    write_embedding_file(&set, &path).unwrap();
    let written = fs::read(&path).unwrap();
    assert_eq!(written, reference_embd_bytes(set.data.as_slice(), 4, &[0, 1, 1]));
}

#[test]
fn single_sample_file_size() {
    let set = EmbeddingSet::new("x", Matrix::from_rows(&[[1.0f64, 2.0]]), vec![0]).unwrap();
    assert_eq!(encode_embedding(&set, DType::F64).unwrap().len(), 4 + 4 + 4 + 8 + 1 + 2 * 8 + 4);
    assert_eq!(encode_embedding(&set, DType::F32).unwrap().len(), 4 + 4 + 4 + 8 + 1 + 2 * 4 + 4);
}

#[test]
fn round_trips_are_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let set = sample_set();
    let path = dir.path().join("audio.embd");
    write_embedding_file(&set, &path).unwrap();
    let back = read_embedding_file::<f64>(&path).unwrap();
    assert_eq!(back.modality_name, "audio");
    assert_eq!(back.labels, set.labels);
    for (a, b) in back.data.as_slice().iter().zip(set.data.as_slice()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    let single: EmbeddingSet<f32> = EmbeddingSet::new("v", set.data.cast(), set.labels.clone()).unwrap();
    let path32 = dir.path().join("v.embd");
    write_embedding_file(&single, &path32).unwrap();
    let back32 = read_embedding_file::<f32>(&path32).unwrap();
    for (a, b) in back32.data.as_slice().iter().zip(single.data.as_slice()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
    assert_eq!(fs::read(&path32).unwrap()[20], 0);
}

#[test]
fn read_errors_are_distinct() {
    let good = encode_embedding(&sample_set(), DType::F64).unwrap();
    let expect = |bytes: &[u8]| decode_embedding::<f64>(bytes, "m").unwrap_err();

    let mut bad_magic = good.clone();
    bad_magic[..4].copy_from_slice(b"XXXX");
    assert!(matches!(expect(&bad_magic), FormatError::BadMagic { .. }));

    assert!(matches!(expect(&good[..good.len() - 20]), FormatError::Truncated { .. }));

    let mut version = good.clone();
    version[4] = 2;
    assert!(matches!(expect(&version), FormatError::UnsupportedVersion(2)));

    let mut nan = good.clone();
    nan[21..29].copy_from_slice(&f64::NAN.to_le_bytes());
    assert!(matches!(expect(&nan), FormatError::NonFinite { row: 0, col: 0 }));

    let mut dtype = good.clone();
    dtype[20] = 9;
    assert!(matches!(expect(&dtype), FormatError::UnknownDType(9)));

    let names: Vec<&str> = [
        expect(&bad_magic),
        expect(&good[..30]),
        expect(&version),
        expect(&nan),
    ]
    .iter()
    .map(|e| e.name())
    .collect();
    let mut unique = names.clone();
    unique.dedup();
    assert_eq!(unique.len(), 4);
}

#[test]
fn non_finite_values_are_rejected_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.embd");
    let set = EmbeddingSet {
        modality_name: "bad".into(),
        data: Matrix::from_rows(&[[1.0, f64::INFINITY]]),
        labels: vec![0],
    };
    assert!(write_embedding_file(&set, &path).is_err());
    assert!(!path.exists());
}

#[test]
fn missing_file_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        read_embedding_file::<f64>(dir.path().join("nope.embd")),
        Err(Error::NotFound(_))
    ));
}

#[test]
fn manifest_round_trip_and_header_checks() {
    let dir = tempfile::tempdir().unwrap();
    let params = CorpusParams {
        num_classes: 3,
        per_class: 7,
        dim: 5,
        ..CorpusParams::default()
    };
    let ds = generate_corpus::<f64>(&params).unwrap();
    let manifest_path = save_dataset(&ds, dir.path(), Some(4)).unwrap();
    let (back, manifest) = load_dataset::<f64>(&manifest_path).unwrap();
    assert_eq!(back, ds);
    assert_eq!((manifest.dim, manifest.count, manifest.num_classes), (5, 21, 3));
    assert_eq!(manifest.seed, Some(4));

    // A manifest whose count disagrees with the file header is rejected.
    let mut wrong = manifest.clone();
    wrong.count = 22;
    wrong.write(&manifest_path).unwrap();
    assert!(load_dataset::<f64>(&manifest_path).is_err());
}

#[test]
fn corpus_is_deterministic_and_well_formed() {
    let params = CorpusParams {
        num_classes: 4,
        per_class: 30,
        dim: 6,
        modality_count: 3,
        seed: 9,
        ..CorpusParams::default()
    };
    let a = generate_corpus::<f64>(&params).unwrap();
    let b = generate_corpus::<f64>(&params).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.modality_count(), 3);
    assert_eq!(a.count(), 120);
    for c in 0..4 {
        assert_eq!(a.class_rows(c).len(), 30);
    }
    let other = generate_corpus::<f64>(&CorpusParams { seed: 10, ..params }).unwrap();
    assert_ne!(a, other);
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn cross_correlations(coupling: f64) -> Vec<Vec<f64>> {
    let params = CorpusParams {
        num_classes: 1,
        per_class: 500,
        cross_modal_coupling: coupling,
        ..CorpusParams::default()
    };
    let ds = generate_corpus::<f64>(&params).unwrap();
    let (a, v) = (&ds.modality(0).data, &ds.modality(1).data);
    let column = |m: &Matrix<f64>, j: usize| (0..m.rows()).map(|r| m.get(r, j)).collect::<Vec<f64>>();
    (0..ds.dim())
        .map(|i| (0..ds.dim()).map(|j| pearson(&column(a, i), &column(v, j))).collect())
        .collect()
}

#[test]
fn zero_coupling_leaves_modalities_uncorrelated() {
    let r = cross_correlations(0.0);
    let d = r.len();
    for (i, row) in r.iter().enumerate() {
        assert!(row[i].abs() < 0.1, "coordinate {i}: r = {}", row[i]);
    }
    let rms = (r.iter().flatten().map(|x| x * x).sum::<f64>() / (d * d) as f64).sqrt();
    assert!(rms < 0.1, "cross-block rms correlation {rms}");

    let coupled = cross_correlations(0.8);
    let mean_diag = (0..d).map(|i| coupled[i][i].abs()).sum::<f64>() / d as f64;
    assert!(mean_diag > 0.3, "coupled corpus mean |r| {mean_diag}");
}

#[test]
fn full_coupling_makes_modalities_linear_images_of_each_other() {
    let params = CorpusParams {
        num_classes: 2,
        per_class: 200,
        cross_modal_coupling: 1.0,
        ..CorpusParams::default()
    };
    let ds = generate_corpus::<f64>(&params).unwrap();
    for c in 0..2 {
        let rows = ds.class_rows(c);
        let a = ds.modality(0).data.select_rows(rows);
        let v = ds.modality(1).data.select_rows(rows);
        let pred = RidgeHead::fit(&a, &v, 1e-9).unwrap().apply(&a);
        let means = v.col_means();
        let mut ss_res = 0.0;
        let mut ss_tot = 0.0;
        for r in 0..v.rows() {
            for k in 0..v.cols() {
                ss_res += (v.get(r, k) - pred.get(r, k)).powi(2);
                ss_tot += (v.get(r, k) - means[k]).powi(2);
            }
        }
        assert!(1.0 - ss_res / ss_tot > 0.999, "class {c}");
    }
}

#[test]
fn probe_accuracy_grows_with_class_separation() {
    let mut last = 0.0;
    for sep in [0.25, 0.75, 2.0] {
        let params = CorpusParams {
            per_class: 100,
            class_separation: sep,
            ..CorpusParams::default()
        };
        let (train, test) = generate_corpus_splits::<f64>(&params, 100).unwrap();
        let cfg = ProbeConfig {
            epochs: 100,
            ..ProbeConfig::default()
        };
        let acc = train_linear_probe(
            &LabeledFeatures::from_dataset(&train, ProbeInput::Concat).unwrap(),
            &LabeledFeatures::from_dataset(&test, ProbeInput::Concat).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!(acc > last, "separation {sep}: {acc} <= {last}");
        last = acc;
    }
}

#[test]
fn dataset_rejects_misaligned_modalities() {
    let a = EmbeddingSet::new("a", Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]), vec![0, 1]).unwrap();
    let shuffled = EmbeddingSet::new("v", Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]), vec![1, 0]).unwrap();
    assert!(PairedMultiModalDataset::new(vec![a.clone(), shuffled], 2, vec!["x".into(), "y".into()]).is_err());
    let short = EmbeddingSet::new("v", Matrix::from_rows(&[[0.0, 1.0]]), vec![0]).unwrap();
    assert!(PairedMultiModalDataset::new(vec![a.clone(), short], 2, vec!["x".into(), "y".into()]).is_err());
    let narrow = EmbeddingSet::new("v", Matrix::from_rows(&[[1.0], [2.0]]), vec![0, 1]).unwrap();
    assert!(PairedMultiModalDataset::new(vec![a.clone(), narrow], 2, vec!["x".into(), "y".into()]).is_err());
    // Every class needs at least one sample.
    assert!(PairedMultiModalDataset::new(vec![a], 3, vec!["x".into(), "y".into(), "z".into()]).is_err());
}
