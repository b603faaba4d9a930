use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use cfcondense::condense::{self, load_checkpoint, load_checkpoint_meta, save_checkpoint, CondenseConfig, IterationRecord};
use cfcondense::data::{decode_embedding, generate_corpus_splits, load_dataset, save_dataset, CorpusParams, DatasetManifest};
use cfcondense::eval::{compare_methods, evaluate_synthetic, CompareConfig, Method};
use cfcondense::overrides::{apply_overrides, parse_config};
use cfcondense::{DType, Error, FormatError, Result, Scalar};

const THREADS_ENV: &str = "CFCONDENSE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "cfcondense", version, about = "Condense paired multi-modal embedding datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic paired multi-modal corpus with a held-out test split.
    Generate(GenerateArgs),
    /// Condense a dataset into a synthetic set and write a checkpoint.
    Condense(CondenseArgs),
    /// Score a checkpoint or compare condensation methods.
    Eval(EvalArgs),
    /// Print header fields and statistics of an EMBD, manifest or trace file as JSON.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 500)]
    per_class: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    modalities: usize,
    #[arg(long, default_value_t = 2.0)]
    separation: f64,
    #[arg(long, default_value_t = 0.8)]
    coupling: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Test rows per class written to `<out>/test`; 0 skips the split.
    #[arg(long, default_value_t = 100)]
    test_per_class: usize,
    #[arg(long, default_value = "f64", value_parser = parse_dtype)]
    dtype: DType,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CondenseArgs {
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// Condensation config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Checkpoint directory.
    #[arg(long)]
    out: PathBuf,
    /// Dotted `key=value` applied over the config, e.g. `weights.lambda_cross=0`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Suppress per-iteration progress lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Training-split manifest.
    #[arg(long)]
    data: PathBuf,
    /// Test-split manifest; defaults to `test/manifest.json` next to `--data`.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Checkpoint directory to score.
    #[arg(long, conflicts_with = "method")]
    syn: Option<PathBuf>,
    /// Methods to compare: random, herding, mmd_condense, cfd_condense.
    #[arg(long, value_delimiter = ',', required_unless_present = "syn")]
    method: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    dpc: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    /// Evaluation config (JSON with `condense`, `probe` and `ridge` sections).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory receiving `report.csv` and `report.json`.
    #[arg(long)]
    report_out: PathBuf,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    file: PathBuf,
}

fn parse_dtype(s: &str) -> std::result::Result<DType, String> {
    match s {
        "f32" | "float32" => Ok(DType::F32),
        "f64" | "float64" => Ok(DType::F64),
        other => Err(format!("unknown dtype `{other}` (expected f32 or f64)")),
    }
}

fn emit_error(kind: &str, message: &str, exit_code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message, "exit_code": exit_code }));
    ExitCode::from(exit_code)
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::config(THREADS_ENV, format!("expected a positive integer, got `{raw}`")))?;
    // A second initialization only happens in tests that reuse the process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            return emit_error("UsageError", err.render().to_string().trim_end(), 2);
        }
    };
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Condense(args) => cmd_condense(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Inspect(args) => cmd_inspect(&args),
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => emit_error(err.kind(), &err.to_string(), err.exit_code() as u8),
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let params = CorpusParams {
        num_classes: args.classes,
        per_class: args.per_class,
        dim: args.dim,
        modality_count: args.modalities,
        class_separation: args.separation,
        cross_modal_coupling: args.coupling,
        seed: args.seed,
    };
    match args.dtype {
        DType::F64 => generate_typed::<f64>(&params, args),
        DType::F32 => generate_typed::<f32>(&params, args),
    }
}

fn generate_typed<T: Scalar>(params: &CorpusParams, args: &GenerateArgs) -> Result<()> {
    let (train, test) = generate_corpus_splits::<T>(params, args.test_per_class.max(1))?;
    let manifest = save_dataset(&train, &args.out, Some(args.seed))?;
    println!("{}", json!({ "manifest": manifest, "count": train.count(), "dim": train.dim() }));
    if args.test_per_class > 0 {
        let test_manifest = save_dataset(&test, args.out.join("test"), Some(args.seed))?;
        println!("{}", json!({ "manifest": test_manifest, "count": test.count(), "dim": test.dim() }));
    }
    Ok(())
}

fn read_config_file<C: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<C> {
    match path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config(&text)
        }
        None => Ok(C::default()),
    }
}

fn progress_line(record: &IterationRecord) -> String {
    let b = &record.breakdown;
    format!(
        "iter={} uni={} cross={} joint={} total={}",
        record.iteration,
        b.uni(),
        b.cross,
        b.joint,
        b.total
    )
}

fn cmd_condense(args: &CondenseArgs) -> Result<()> {
    let base: CondenseConfig = read_config_file(args.config.as_deref())?;
    let config = apply_overrides(&base, &args.overrides)?;
    let manifest = DatasetManifest::read(&args.data)?;
    match manifest.dtype {
        DType::F64 => condense_typed::<f64>(&config, args),
        DType::F32 => condense_typed::<f32>(&config, args),
    }
}

fn condense_typed<T: Scalar>(config: &CondenseConfig, args: &CondenseArgs) -> Result<()> {
    let (dataset, _) = load_dataset::<T>(&args.data)?;
    let quiet = args.quiet;
    let (syn, trace) = condense::condense_with_observer(&dataset, config, |record| {
        if !quiet {
            println!("{}", progress_line(record));
        }
    })?;
    save_checkpoint(&syn, &trace, &args.out, config.normalize)?;
    let last = trace.final_eval().map(|e| &e.breakdown);
    println!(
        "{}",
        json!({
            "checkpoint": args.out,
            "iterations": trace.iterations.len(),
            "initial_total": trace.initial_eval().map(|e| e.breakdown.total),
            "final_total": last.map(|b| b.total),
            "final_uni": last.map(|b| b.uni()),
            "final_cross": last.map(|b| b.cross),
            "final_joint": last.map(|b| b.joint),
        })
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let base: CompareConfig = read_config_file(args.config.as_deref())?;
    let config = apply_overrides(&base, &args.overrides)?;
    let manifest = DatasetManifest::read(&args.data)?;
    match manifest.dtype {
        DType::F64 => eval_typed::<f64>(config, args),
        DType::F32 => eval_typed::<f32>(config, args),
    }
}

fn eval_typed<T: Scalar>(mut config: CompareConfig, args: &EvalArgs) -> Result<()> {
    let test_path = match &args.test {
        Some(path) => path.clone(),
        None => args.data.parent().unwrap_or(Path::new(".")).join("test").join("manifest.json"),
    };
    let (train, _) = load_dataset::<T>(&args.data)?;
    let (test, _) = load_dataset::<T>(&test_path)?;
    let report = match &args.syn {
        Some(dir) => {
            let meta = load_checkpoint_meta(dir)?;
            let (syn, _) = load_checkpoint::<T>(dir)?;
            config.condense.normalize = meta.normalized;
            evaluate_synthetic(&train, &syn, &test, "checkpoint", &args.seeds, &config)?
        }
        None => {
            let methods = args.method.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
            compare_methods(&train, &test, &args.dpc, &methods, &args.seeds, &config)?
        }
    };
    if let Err(message) = report.check_invariants() {
        return Err(Error::InvalidDataset(format!("report invariant violated: {message}")));
    }
    fs::create_dir_all(&args.report_out).map_err(|e| Error::io(&args.report_out, e))?;
    let csv = args.report_out.join("report.csv");
    let json_path = args.report_out.join("report.json");
    report.write_csv(&csv)?;
    report.write_json(&json_path)?;
    print!("{}", report.to_csv());
    println!("{}", json!({ "csv": csv, "json": json_path, "full_data_accuracy": report.full_data_accuracy_mean }));
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<()> {
    let path = &args.file;
    if path.is_dir() {
        let meta = load_checkpoint_meta(path)?;
        println!("{}", serde_json::to_string_pretty(&json!({ "kind": "checkpoint", "meta": meta })).expect("json"));
        return Ok(());
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let summary = if bytes.starts_with(b"EMBD") {
        inspect_embedding(path, &bytes)?
    } else {
        let value = std::str::from_utf8(&bytes)
            .ok()
            .and_then(|text| serde_json::from_str::<Value>(text).ok())
            .filter(Value::is_object);
        match value {
            Some(value) => inspect_json(path, value)?,
            None => {
                // Not JSON: report the embedding decoder's verdict on the header.
                let source = decode_embedding::<f64>(&bytes, "inspect")
                    .err()
                    .unwrap_or(FormatError::BadMagic { found: [0; 4] });
                return Err(Error::Format {
                    path: path.clone(),
                    source,
                });
            }
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    Ok(())
}

fn inspect_embedding(path: &Path, bytes: &[u8]) -> Result<Value> {
    let set = decode_embedding::<f64>(bytes, "inspect").map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })?;
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("header checked"));
    let dtype = DType::from_tag(bytes[20]);
    let mut per_class = std::collections::BTreeMap::<u32, usize>::new();
    for &label in &set.labels {
        *per_class.entry(label).or_default() += 1;
    }
    let norms: Vec<f64> = set.data.iter_rows().map(cfcondense::numeric::norm).collect();
    let mean_norm = if norms.is_empty() {
        0.0
    } else {
        cfcondense::numeric::compensated_mean(&norms)
    };
    Ok(json!({
        "kind": "embedding",
        "version": version,
        "dim": set.dim(),
        "count": set.count(),
        "dtype": dtype,
        "per_class_counts": per_class,
        "mean_norm": mean_norm,
        "finite": set.data.is_finite(),
    }))
}

fn inspect_json(path: &Path, value: Value) -> Result<Value> {
    let has = |key: &str| value.get(key).is_some();
    if has("iterations") && has("evals") {
        let trace: condense::CondenseTrace = serde_json::from_value(value).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let last = trace.iterations.last().map(|r| &r.breakdown);
        return Ok(json!({
            "kind": "trace",
            "iterations": trace.iterations.len(),
            "final_loss": last.map(|b| b.total),
            "final_uni": last.map(|b| b.uni()),
            "final_cross": last.map(|b| b.cross),
            "final_joint": last.map(|b| b.joint),
            "initial_eval_total": trace.initial_eval().map(|e| e.breakdown.total),
            "final_eval_total": trace.final_eval().map(|e| e.breakdown.total),
            "sigma_t": trace.sigma_t,
        }));
    }
    if has("modalities") && has("count") && has("format_version") {
        let manifest: DatasetManifest = serde_json::from_value(value).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        return Ok(json!({ "kind": "manifest", "manifest": manifest }));
    }
    if has("rows") && has("summaries") {
        return Ok(json!({ "kind": "report", "report": value }));
    }
    Ok(json!({ "kind": "json", "keys": value.as_object().map(|o| o.keys().cloned().collect::<Vec<_>>()) }))
}
