//! The `train`, `score` and `gen-data` commands behind the binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use serde::Serialize;
use thiserror::Error;

use crate::controller::BudgetTracker;
use crate::evaluation::{evaluate, EvalError, EvaluationRecord};
use crate::ingest::{
    generate_synthetic, load_dataset, load_labels, load_table, read_info, split_train_test,
    write_dataset, DatasetInfo, IngestError, SyntheticSpec, LABEL_FILE,
};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineError};

/// Overrides the memory budget of `info.json`, in MiB.
pub const MEM_ENV: &str = "AUTOSMART_MEM_MB";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainArgs {
    pub config: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub out: PathBuf,
    pub budget_s: Option<f64>,
    pub seed: u64,
    pub workers: Option<usize>,
}

/// Reproducibility record written next to the predictions.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub version: String,
    pub config: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
    pub workers: Option<usize>,
    pub time_budget_s: f64,
    pub mem_budget_mb: u64,
    pub budget_override_s: Option<f64>,
    pub mem_override_mb: Option<u64>,
    pub phase_log: PathBuf,
    pub selection_report: PathBuf,
    pub wall_s: f64,
    pub test_rows: usize,
    pub train_rows_used: usize,
    pub n_features: usize,
    pub n_models: usize,
    pub learning_rate: Option<f64>,
    pub rounds: Option<usize>,
    pub fallback: Option<String>,
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Probability with 6 significant digits.
pub fn format_probability(p: f64) -> String {
    if p == 0.0 || !p.is_finite() {
        return format!("{p}");
    }
    let decimals = (5 - p.abs().log10().floor() as i32).max(0) as usize;
    format!("{p:.decimals$}")
}

fn mem_override() -> Result<Option<u64>, CliError> {
    match std::env::var(MEM_ENV) {
        Ok(v) => {
            v.trim().parse().map(Some).map_err(|_| {
                CliError::Invalid(format!("{MEM_ENV}={v} is not a whole number of MiB"))
            })
        }
        Err(_) => Ok(None),
    }
}

/// Full pipeline from files: writes predictions, the manifest
/// (`<out>.manifest.json`), the phase log (`<out>.phases.tsv`) and the
/// selection report (`<out>.selection.tsv`).
pub fn cmd_train_predict(args: &TrainArgs) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let mut info = read_info(&args.config)?;
    let mem_mb = mem_override()?;
    if let Some(mb) = mem_mb {
        info.mem_budget_bytes = mb << 20;
    }
    if let Some(b) = args.budget_s {
        if b.is_nan() || b <= 0.0 {
            return Err(CliError::Invalid(format!(
                "budget must be positive, got {b}"
            )));
        }
        info.time_budget_s = b;
    }
    let tracker = BudgetTracker::new(info.time_budget_s, info.mem_budget_bytes);
    let train = load_dataset(&args.train, &info)?;
    if train.labels.is_none() {
        return Err(CliError::Invalid(format!(
            "{} has no {LABEL_FILE}",
            args.train.display()
        )));
    }
    let main_info = info.main_table();
    let test_main = load_table(&args.test.join(&main_info.path), main_info)?;
    let test_rows = test_main.n_rows;

    let cfg = PipelineConfig {
        seed: args.seed,
        workers: args.workers,
        ..Default::default()
    };
    let out = run_pipeline(train, test_main, &cfg, &tracker)?;
    if let Some(why) = &out.fallback {
        warn!("degraded run: {why}");
    }

    let mut text = String::with_capacity(out.predictions.len() * 10);
    for &p in &out.predictions {
        text.push_str(&format_probability(p));
        text.push('\n');
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(&args.out, text).map_err(io_err(&args.out))?;

    let phase_log = sibling(&args.out, ".phases.tsv");
    fs::write(&phase_log, tracker.phase_log_tsv()).map_err(io_err(&phase_log))?;
    let selection_report = sibling(&args.out, ".selection.tsv");
    fs::write(&selection_report, out.selection.to_tsv()).map_err(io_err(&selection_report))?;

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: args.config.clone(),
        train: args.train.clone(),
        test: args.test.clone(),
        output: args.out.clone(),
        seed: args.seed,
        workers: args.workers,
        time_budget_s: info.time_budget_s,
        mem_budget_mb: info.mem_budget_bytes >> 20,
        budget_override_s: args.budget_s,
        mem_override_mb: mem_mb,
        phase_log,
        selection_report,
        wall_s: start.elapsed().as_secs_f64(),
        test_rows,
        train_rows_used: out.train_rows_used,
        n_features: out.feature_names.len(),
        n_models: out.models.len(),
        learning_rate: out.learning_rate,
        rounds: out.rounds,
        fallback: out.fallback,
    };
    let path = sibling(&args.out, ".manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Reads one probability per line.
pub fn read_predictions(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| {
                CliError::Invalid(format!("{}:{}: not a number: {l}", path.display(), i + 1))
            })
        })
        .collect()
}

pub fn cmd_score(
    pred: &Path,
    labels: &Path,
    auc_base: Option<f64>,
    auc_max: Option<f64>,
) -> Result<EvaluationRecord, CliError> {
    let p = read_predictions(pred)?;
    let y = load_labels(labels, "label")?;
    if p.len() != y.len() {
        return Err(CliError::Invalid(format!(
            "{} predictions but {} labels",
            p.len(),
            y.len()
        )));
    }
    if auc_base.is_some() != auc_max.is_some() {
        return Err(CliError::Invalid(
            "--auc-base and --auc-max go together".into(),
        ));
    }
    Ok(evaluate(&y, &p, auc_base, auc_max)?)
}

/// Writes `out/info.json`, `out/train/` (all tables and labels) and
/// `out/test/` (main table and its labels, for scoring).
pub fn cmd_gen_data(spec: &Path, seed: u64, out: &Path) -> Result<DatasetInfo, CliError> {
    let text = fs::read_to_string(spec).map_err(io_err(spec))?;
    let spec: SyntheticSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", spec.display())))?;
    let bundle = generate_synthetic(&spec, seed)?;
    let info = DatasetInfo::describe(&bundle, "label");
    let (train, test) = split_train_test(&bundle, spec.test_fraction);
    write_dataset(&train, &info, &out.join("train"))?;
    let test_only_main = crate::data::DatasetBundle {
        related: Vec::new(),
        relations: Vec::new(),
        ..test
    };
    write_dataset(&test_only_main, &info, &out.join("test"))?;
    let path = out.join("info.json");
    fs::write(&path, info.to_json()).map_err(io_err(&path))?;
    Ok(info)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(format_probability(0.123456789), "0.123457");
        assert_eq!(format_probability(0.000123456789), "0.000123457");
        assert_eq!(format_probability(0.5), "0.500000");
    }

    #[test]
    fn sibling_appends_suffix() {
        assert_eq!(
            sibling(Path::new("out/p.txt"), ".manifest.json"),
            PathBuf::from("out/p.txt.manifest.json")
        );
    }
}
