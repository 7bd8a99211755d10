use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Args;
use gcnad::eval::{evaluate, EvalReport, ValidationCriterion};
use gcnad::io::{encode_checkpoint, sha256_file, Bundle, BundlePaths};
use gcnad::trainer::{train_with, EpochRecord, StopReason, TrainHistory};
use gcnad::{Error, LabelSplit, Precision, Real, Result, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::{create_dir, write_file, DataOpts, ModelOpts};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Output directory for checkpoint.bin, metrics.jsonl and manifest.json.
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
    /// Add wall-clock seconds to every metrics line (breaks byte-identical reruns).
    #[arg(long)]
    pub log_timings: bool,
}

/// Result of training one config and evaluating its selected weights.
pub struct Fit {
    pub history: TrainHistory,
    pub best_validation: Option<ValidationCriterion>,
    /// `None` when the split cannot produce a test AUC.
    pub report: Option<EvalReport>,
    pub checkpoint: Vec<u8>,
}

fn fit_typed<T: Real>(bundle: &Bundle, split: &LabelSplit, cfg: &TrainConfig, on_epoch: &mut dyn FnMut(&EpochRecord)) -> Result<Fit> {
    let out = train_with::<T, _>(&bundle.graph, split, &bundle.truth, cfg, |r| on_epoch(r))?;
    let report = match evaluate(&out.model, &out.center, &bundle.graph, split, &bundle.truth, cfg.mode) {
        Ok(r) => Some(r),
        Err(Error::Invalid(msg)) => {
            log::warn!("no test evaluation: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(Fit {
        checkpoint: encode_checkpoint(&out.model, &out.center, cfg)?,
        history: out.history,
        best_validation: out.best_validation,
        report,
    })
}

/// Train at the precision named in `cfg`, then evaluate.
pub fn fit(bundle: &Bundle, split: &LabelSplit, cfg: &TrainConfig, on_epoch: &mut dyn FnMut(&EpochRecord)) -> Result<Fit> {
    match cfg.precision {
        Precision::F32 => fit_typed::<f32>(bundle, split, cfg, on_epoch),
        Precision::F64 => fit_typed::<f64>(bundle, split, cfg, on_epoch),
    }
}

/// Index of the grid point with the best validation criterion; earlier wins ties.
pub fn select_best(criteria: &[Option<ValidationCriterion>]) -> usize {
    let mut best = 0;
    for (i, c) in criteria.iter().enumerate().skip(1) {
        let better = match (c, &criteria[best]) {
            (Some(c), Some(b)) => c.better_than(*b),
            (Some(_), None) => true,
            _ => false,
        };
        if better {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub lambda: f64,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub best_validation: Option<ValidationCriterion>,
    pub stop_reason: StopReason,
    pub test_auc: Option<f64>,
    pub train_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub checkpoint: PathBuf,
    pub metrics: PathBuf,
    pub manifest: PathBuf,
}

/// Everything needed to rerun a training job exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config: TrainConfig,
    pub selected_lambda: f64,
    pub grid: Vec<GridResult>,
    pub seed: u64,
    pub rescaled_attributes: bool,
    pub dataset: Vec<FileHash>,
    pub artifacts: Artifacts,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub total_secs: f64,
}

pub struct TrainSummary {
    pub manifest: RunManifest,
    pub test_auc: Option<f64>,
}

impl TrainSummary {
    /// Short report for the terminal.
    pub fn brief(&self) -> serde_json::Value {
        let sel = self
            .manifest
            .grid
            .iter()
            .find(|g| g.lambda == self.manifest.selected_lambda);
        serde_json::json!({
            "selected_lambda": self.manifest.selected_lambda,
            "best_epoch": sel.and_then(|g| g.best_epoch),
            "best_validation": sel.and_then(|g| g.best_validation),
            "stop_reason": sel.map(|g| g.stop_reason.to_string()),
            "test_auc": self.test_auc,
            "checkpoint": self.manifest.artifacts.checkpoint,
        })
    }
}

#[derive(Serialize)]
struct MetricLine {
    lambda: f64,
    epoch: usize,
    total: f64,
    compactness: f64,
    auc_reg: f64,
    validation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_secs: Option<f64>,
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub(crate) fn dataset_hashes(paths: &BundlePaths) -> Result<Vec<FileHash>> {
    let mut files = vec![("edges", Some(&paths.edges)), ("labels", Some(&paths.labels))];
    files.push(("attributes", paths.attributes.as_ref()));
    files.push(("split", paths.split.as_ref()));
    files
        .into_iter()
        .filter_map(|(role, p)| p.map(|p| (role, p)))
        .map(|(role, p)| {
            Ok(FileHash {
                role: role.into(),
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let started_unix = unix_now();
    let clock = Instant::now();
    let configs = args.model.configs()?;
    let rescale = !args.model.no_rescale;
    let (bundle, split) = args.data.load(rescale)?;
    let dataset = dataset_hashes(&args.data.paths())?;

    create_dir(&args.out)?;
    let metrics_path = args.out.join(METRICS_FILE);
    let mut metrics = BufWriter::new(File::create(&metrics_path).map_err(io_err(&metrics_path))?);

    let mut grid = Vec::new();
    let mut fits = Vec::new();
    for cfg in &configs {
        log::info!("training with lambda = {}", cfg.lambda);
        let t0 = Instant::now();
        let mut write_error = None;
        let mut on_epoch = |r: &EpochRecord| {
            if r.epoch % 50 == 0 {
                log::info!("epoch {:>4}  loss {:.6}  validation {:.6}", r.epoch, r.total, r.validation);
            }
            let line = MetricLine {
                lambda: cfg.lambda,
                epoch: r.epoch,
                total: r.total,
                compactness: r.compactness,
                auc_reg: r.auc_reg,
                validation: r.validation,
                elapsed_secs: args.log_timings.then_some(r.elapsed_secs),
            };
            let res = serde_json::to_writer(&mut metrics, &line)
                .map_err(Error::from)
                .and_then(|_| metrics.write_all(b"\n").map_err(io_err(&metrics_path)));
            if let Err(e) = res {
                write_error.get_or_insert(e);
            }
        };
        let f = fit(&bundle, &split, cfg, &mut on_epoch)?;
        if let Some(e) = write_error {
            return Err(e);
        }
        grid.push(GridResult {
            lambda: cfg.lambda,
            epochs_run: f.history.records.len(),
            best_epoch: f.history.best_epoch,
            best_validation: f.best_validation,
            stop_reason: f.history.stop_reason,
            test_auc: f.report.as_ref().map(|r| r.test_auc),
            train_secs: t0.elapsed().as_secs_f64(),
        });
        fits.push(f);
    }
    metrics.flush().map_err(io_err(&metrics_path))?;

    let best = select_best(&grid.iter().map(|g| g.best_validation).collect::<Vec<_>>());
    let checkpoint_path = args.out.join(CHECKPOINT_FILE);
    write_file(&checkpoint_path, &fits[best].checkpoint)?;

    let test_auc = grid[best].test_auc;
    let manifest_path = args.out.join(MANIFEST_FILE);
    let manifest = RunManifest {
        version: crate::version_string(),
        command: "train".into(),
        config: configs[best].clone(),
        selected_lambda: configs[best].lambda,
        seed: configs[best].seed,
        rescaled_attributes: rescale,
        grid,
        dataset,
        artifacts: Artifacts {
            checkpoint: checkpoint_path,
            metrics: metrics_path,
            manifest: manifest_path.clone(),
        },
        started_unix,
        finished_unix: unix_now(),
        total_secs: clock.elapsed().as_secs_f64(),
    };
    write_file(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(TrainSummary { manifest, test_auc })
}
