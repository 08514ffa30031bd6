//! `specluster` command-line front end.
//!
//! JSON results go to standard output and logs to standard error. Exit
//! codes: 0 on success, 1 on runtime or convergence failure, 2 on invalid
//! input.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{debug, info, warn};
use serde::Deserialize;
use serde_json::{json, Value};
use specluster::analysis::{self, condition_report};
use specluster::harness::{self, SweepSpec};
use specluster::io as dsio;
use specluster::linalg::{self, DenseMatrix};
use specluster::models::{self, BsbmParams};
use specluster::pipeline::{self, PipelineOptions};
use specluster::{BinaryDataset, Labeling, MixtureModel};

const SEED_ENV: &str = "SPECLUSTER_SEED";

#[derive(Parser)]
#[command(name = "specluster", version, about = "Two-phase spectral clustering of binary data")]
struct Cli {
    /// JSON file of default option values; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Log to standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a mixture model or a B-SBM.
    Generate(GenerateArgs),
    /// Cluster a dataset.
    Cluster(ClusterArgs),
    /// Print the condition report of a dataset with a model sidecar.
    Check(CheckArgs),
    /// Run a Monte-Carlo sweep.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Mixture model JSON: {"m", "means", "weights", "sigma_sq"?}.
    #[arg(long, value_name = "FILE", conflicts_with = "bsbm")]
    model: Option<PathBuf>,
    /// Inline B-SBM parameters, e.g. m=400,n=400,k=2,p=0.45,q=0.05.
    #[arg(long, value_name = "SPEC")]
    bsbm: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Writes PREFIX.mtx and PREFIX.json.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long, value_name = "PREFIX")]
    data: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Labels file, written as a JSON array.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also print matching and center-error diagnostics.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, value_name = "PREFIX")]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Writes PREFIX.csv and, with --trial-log, PREFIX.trials.jsonl.
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    /// Caps the number of worker threads.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    trial_log: bool,
}

/// Values a `--config` file may supply.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<PathBuf>,
    bsbm: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    data: Option<PathBuf>,
    k: Option<usize>,
    diagnostics: Option<bool>,
    spec: Option<PathBuf>,
    threads: Option<usize>,
    trial_log: Option<bool>,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Invalid(_) => 2,
        }
    }
}

impl From<specluster::Error> for Failure {
    fn from(e: specluster::Error) -> Self {
        match e {
            specluster::Error::Convergence { .. } | specluster::Error::Io(_) => Failure::Runtime(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Invalid(msg) | Failure::Runtime(msg)) = &f;
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Generate(a) => generate(a, cfg),
        Command::Cluster(a) => cluster(a, cfg),
        Command::Check(a) => check(a, cfg),
        Command::Sweep(a) => sweep(a, cfg),
    }
}

fn load_config(path: &Path) -> CliResult<FileConfig> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("config {}: {e}", path.display())))
}

/// Flag, then config file, then `SPECLUSTER_SEED`, then 0.
fn resolve_seed(flag: Option<u64>, cfg: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag.or(cfg) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| invalid(format!("missing --{flag}")))
}

fn emit(value: &Value) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(out).map_err(|e| Failure::Runtime(e.to_string()))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn suffixed(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(invalid(format!("output directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    m: usize,
    means: Vec<Vec<f64>>,
    weights: Vec<f64>,
    #[serde(default)]
    sigma_sq: Option<f64>,
}

fn parse_bsbm(spec: &str) -> CliResult<BsbmParams> {
    let mut obj = serde_json::Map::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| invalid(format!("--bsbm entry {part:?} is not key=value")))?;
        let key = key.trim();
        if !["m", "n", "k", "p", "q"].contains(&key) {
            return Err(invalid(format!("--bsbm: unknown key {key:?}")));
        }
        let num: f64 = val
            .trim()
            .parse()
            .map_err(|_| invalid(format!("--bsbm: {key}={val} is not a number")))?;
        let num = if key == "p" || key == "q" {
            json!(num)
        } else if num >= 0.0 && num.fract() == 0.0 {
            json!(num as u64)
        } else {
            return Err(invalid(format!("--bsbm: {key} must be a count")));
        };
        if obj.insert(key.to_string(), num).is_some() {
            return Err(invalid(format!("--bsbm: {key} given twice")));
        }
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| invalid(format!("--bsbm: {e}")))
}

fn generate(a: GenerateArgs, cfg: FileConfig) -> CliResult<()> {
    let seed = resolve_seed(a.seed, cfg.seed)?;
    let out = required(a.out.or(cfg.out), "out")?;
    ensure_parent(&out)?;
    let model_path = a.model.or(if a.bsbm.is_some() { None } else { cfg.model });
    let bsbm_spec = a.bsbm.or(if model_path.is_some() { None } else { cfg.bsbm });

    let ds = match (model_path, bsbm_spec) {
        (Some(path), None) => {
            let text = fs::read_to_string(&path).map_err(|e| invalid(format!("model {}: {e}", path.display())))?;
            let mf: ModelFile =
                serde_json::from_str(&text).map_err(|e| invalid(format!("model {}: {e}", path.display())))?;
            let means = DenseMatrix::from_rows(&mf.means)?;
            let model = MixtureModel::new(means, mf.weights, mf.sigma_sq)?;
            models::sample(&model, mf.m, seed)?
        }
        (None, Some(spec)) => models::sample_bsbm(&parse_bsbm(&spec)?, seed)?,
        (None, None) => return Err(invalid("give one of --model and --bsbm")),
        (Some(_), Some(_)) => return Err(invalid("--model and --bsbm are mutually exclusive")),
    };
    info!("sampled {}x{} matrix with seed {seed}", ds.matrix().rows(), ds.matrix().cols());
    dsio::write_dataset(&out, &ds)?;
    info!("wrote {} and {}", dsio::matrix_path(&out).display(), dsio::sidecar_path(&out).display());

    let model = ds.model().expect("sampled datasets carry their model");
    if model.k() < 2 {
        warn!("a single-component model has no separation; no condition report");
        return emit(&Value::Null);
    }
    let report = condition_report(&ds, model, ds.bsbm(), model.k())?;
    emit(&to_value(&report))
}

fn load_dataset(prefix: &Path) -> CliResult<BinaryDataset> {
    let mtx = dsio::matrix_path(prefix);
    if !mtx.is_file() {
        return Err(invalid(format!("no dataset at {}", mtx.display())));
    }
    dsio::read_dataset(prefix).map_err(|e| match e {
        specluster::Error::Io(io) => invalid(format!("{}: {io}", prefix.display())),
        other => other.into(),
    })
}

fn cluster(a: ClusterArgs, cfg: FileConfig) -> CliResult<()> {
    let data = required(a.data.or(cfg.data), "data")?;
    let k = required(a.k.or(cfg.k), "k")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let seed = resolve_seed(a.seed, cfg.seed)?;
    let diagnostics = a.diagnostics || cfg.diagnostics.unwrap_or(false);
    ensure_parent(&out)?;

    let ds = load_dataset(&data)?;
    let m = ds.rows();
    if k == 0 || 2 * k > m {
        return Err(invalid(format!("k = {k} needs 1 <= k <= m/2 = {}", m / 2)));
    }
    let res = pipeline::cluster_with(ds.matrix(), k, seed, &PipelineOptions::default())?;
    if res.ambiguous_matching {
        warn!("the two half center sets disagree; matching is ambiguous");
    }
    let mut text = serde_json::to_string(&res.labeling).map_err(|e| Failure::Runtime(e.to_string()))?;
    text.push('\n');
    fs::write(&out, text).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    info!("wrote {} labels to {}", m, out.display());

    let score = match ds.truth() {
        Some(t) => Some(analysis::score(&res.labeling, &Labeling::new(t.to_vec()), k)?),
        None => None,
    };
    if !diagnostics {
        return match score {
            Some(s) => emit(&to_value(&s)),
            None => Ok(()),
        };
    }

    let mut diag = json!({
        "ambiguous_matching": res.ambiguous_matching,
        "kmeans_degenerate": res.kmeans_degenerate,
        "matching": res.matching,
        "cluster_sizes_first": res.centers_first.cluster_sizes(),
        "cluster_sizes_second": res.centers_second.cluster_sizes(),
    });
    if let (Some(model), Some(_)) = (ds.model(), ds.truth()) {
        if model.k() == k && k >= 2 {
            let expected = ds.expected_matrix()?;
            let mut checks = Vec::new();
            for (half, centers) in [(&res.first_half, &res.centers_first), (&res.second_half, &res.centers_second)] {
                let noise = ds.matrix().select_rows(half).sub(&expected.select_rows(half))?;
                let norm = linalg::spectral_norm(&noise, linalg::DEFAULT_TOL)?;
                debug!("half of {} rows: noise norm {norm}", half.len());
                checks.push(to_value(&analysis::center_error_check(centers, model, norm, half.len(), k)?));
            }
            diag["center_error"] = Value::Array(checks);
        }
    }
    emit(&json!({ "score": score, "diagnostics": diag }))
}

fn check(a: CheckArgs, cfg: FileConfig) -> CliResult<()> {
    let data = required(a.data.or(cfg.data), "data")?;
    let side = dsio::sidecar_path(&data);
    if !side.is_file() {
        return Err(invalid(format!("no sidecar at {}", side.display())));
    }
    let ds = load_dataset(&data)?;
    let model = ds
        .model()
        .ok_or_else(|| invalid(format!("sidecar {} has no model", side.display())))?;
    let report = condition_report(&ds, model, ds.bsbm(), model.k())?;
    emit(&to_value(&report))
}

fn sweep(a: SweepArgs, cfg: FileConfig) -> CliResult<()> {
    let spec_path = required(a.spec.or(cfg.spec), "spec")?;
    let out = required(a.out.or(cfg.out), "out")?;
    let threads = a.threads.or(cfg.threads);
    let trial_log = a.trial_log || cfg.trial_log.unwrap_or(false);
    ensure_parent(&out)?;
    if threads == Some(0) {
        return Err(invalid("--threads must be at least 1"));
    }
    let spec = SweepSpec::from_path(&spec_path).map_err(|e| match e {
        specluster::Error::Io(io) => invalid(format!("{}: {io}", spec_path.display())),
        other => other.into(),
    })?;
    // Validate every cell before any trial runs.
    for cell in spec.cells()? {
        let inst = harness::cell_instance(spec.family, &cell)?;
        if inst.m < 2 * inst.k {
            let shown = serde_json::to_string(&cell).unwrap_or_default();
            return Err(invalid(format!("cell {shown}: m = {} is below 2k = {}", inst.m, 2 * inst.k)));
        }
    }
    let result = harness::run_sweep_with(&spec, threads)?;
    let failures: usize = result.cells.iter().map(|c| c.failures).sum();
    if failures > 0 {
        warn!("{failures} trials failed; see the error field of the trial log");
    }

    let csv_path = suffixed(&out, ".csv");
    let file = fs::File::create(&csv_path).map_err(|e| Failure::Runtime(format!("{}: {e}", csv_path.display())))?;
    harness::write_csv(BufWriter::new(file), &result)?;
    let mut summary = json!({
        "cells": result.cells.len(),
        "trials": result.trials.len(),
        "failures": failures,
        "csv": csv_path,
    });
    if trial_log {
        let log_path = suffixed(&out, ".trials.jsonl");
        let file =
            fs::File::create(&log_path).map_err(|e| Failure::Runtime(format!("{}: {e}", log_path.display())))?;
        harness::write_trial_log(BufWriter::new(file), &result)?;
        summary["trial_log"] = json!(log_path);
    }
    info!("sweep finished: {} cells", result.cells.len());
    emit(&summary)
}
