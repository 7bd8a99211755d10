//! Replicate benchmark: one training run per (label ratio, split replicate),
//! summarized as mean and standard deviation of test AUC.
//!
//! Finished replicates are appended to `bench_manifest.json` as they
//! complete, so an interrupted run picks up where it stopped.

use std::path::PathBuf;

use clap::Args;
use gcnad::datagen::{make_split, SplitSpec};
use gcnad::eval::ValidationCriterion;
use gcnad::io::load_bundle;
use gcnad::{Error, Mode, Result};
use serde::{Deserialize, Serialize};

use crate::train::{dataset_hashes, fit, select_best, unix_now};
use crate::{create_dir, write_file, ModelOpts};

pub const BENCH_CSV: &str = "bench.csv";
pub const BENCH_MANIFEST: &str = "bench_manifest.json";
pub const CSV_HEADER: &str = "ratio,mode,replicates,mean_auc,std_auc,table";

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Labeled ratios, one output row each.
    #[arg(long, value_delimiter = ',', default_value = "0.025,0.05,0.10")]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.10)]
    pub val_ratio: f64,
    #[command(flatten)]
    pub model: ModelOpts,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub ratio: f64,
    pub replicate: usize,
    pub lambda: f64,
    pub validation: Option<ValidationCriterion>,
    pub test_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchManifest {
    pub version: String,
    /// Everything except ratios and replicate count; must match to resume.
    pub settings: serde_json::Value,
    pub completed: Vec<ReplicateResult>,
    pub started_unix: u64,
    pub updated_unix: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub ratio: f64,
    pub mode: Mode,
    pub aucs: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation; zero for a single replicate.
    pub std: f64,
}

impl BenchRow {
    pub fn new(ratio: f64, mode: Mode, aucs: Vec<f64>) -> Self {
        let n = aucs.len() as f64;
        let mean = aucs.iter().sum::<f64>() / n;
        let std = (aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
        BenchRow {
            ratio,
            mode,
            aucs,
            mean,
            std,
        }
    }

    /// `mean(std)` in percent, one decimal.
    pub fn table_cell(&self) -> String {
        format!("{:.1}({:.1})", 100.0 * self.mean, 100.0 * self.std)
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{}",
            self.ratio,
            self.mode,
            self.aucs.len(),
            self.mean,
            self.std,
            self.table_cell()
        )
    }
}

fn settings(args: &BenchArgs) -> Result<serde_json::Value> {
    let paths = gcnad::io::BundlePaths::in_dir(&args.data);
    Ok(serde_json::json!({
        "dataset": dataset_hashes(&gcnad::io::BundlePaths { split: None, ..paths })?,
        "configs": args.model.configs()?,
        "validation_ratio": args.val_ratio,
        "rescaled_attributes": !args.model.no_rescale,
    }))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.replicates == 0 || args.ratios.is_empty() {
        return Err(Error::Config("bench needs at least one ratio and one replicate".into()));
    }
    let configs = args.model.configs()?;
    let settings = settings(args)?;
    let bundle = load_bundle(&gcnad::io::BundlePaths { split: None, ..gcnad::io::BundlePaths::in_dir(&args.data) }, !args.model.no_rescale)?;

    create_dir(&args.out)?;
    let manifest_path = args.out.join(BENCH_MANIFEST);
    let mut manifest = if manifest_path.exists() {
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::Io {
            path: manifest_path.clone(),
            source: e,
        })?;
        let m: BenchManifest = serde_json::from_str(&text)?;
        if m.settings != settings {
            return Err(Error::Config(format!(
                "{} was written with different settings; use a fresh --out directory",
                manifest_path.display()
            )));
        }
        log::info!("resuming: {} replicates already done", m.completed.len());
        m
    } else {
        BenchManifest {
            version: crate::version_string(),
            settings,
            completed: Vec::new(),
            started_unix: unix_now(),
            updated_unix: unix_now(),
        }
    };

    for &ratio in &args.ratios {
        for replicate in 0..args.replicates {
            if manifest
                .completed
                .iter()
                .any(|c| c.ratio == ratio && c.replicate == replicate)
            {
                continue;
            }
            let spec = SplitSpec {
                labeled_ratio: ratio,
                validation_ratio: args.val_ratio,
                seed: args.model.seed,
                replicate: replicate as u64,
                require_anomalous: args.model.mode == Mode::AnomalousAndNormal,
                ..Default::default()
            };
            let split = make_split(&bundle.truth, &spec)?;
            let mut fits = Vec::new();
            for cfg in &configs {
                fits.push(fit(&bundle, &split, cfg, &mut |_| {})?);
            }
            let best = select_best(&fits.iter().map(|f| f.best_validation).collect::<Vec<_>>());
            let test_auc = fits[best]
                .report
                .as_ref()
                .map(|r| r.test_auc)
                .ok_or_else(|| Error::Invalid(format!("ratio {ratio} replicate {replicate}: no test AUC")))?;
            log::info!("ratio {ratio} replicate {replicate}: lambda {} test AUC {test_auc:.4}", configs[best].lambda);
            manifest.completed.push(ReplicateResult {
                ratio,
                replicate,
                lambda: configs[best].lambda,
                validation: fits[best].best_validation,
                test_auc,
            });
            manifest.updated_unix = unix_now();
            write_file(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        }
    }

    let rows: Vec<BenchRow> = args
        .ratios
        .iter()
        .map(|&ratio| {
            let aucs = (0..args.replicates)
                .map(|r| {
                    manifest
                        .completed
                        .iter()
                        .find(|c| c.ratio == ratio && c.replicate == r)
                        .map(|c| c.test_auc)
                        .expect("every replicate completed")
                })
                .collect();
            BenchRow::new(ratio, args.model.mode, aucs)
        })
        .collect();
    let mut csv = format!("{CSV_HEADER}\n");
    for row in &rows {
        csv.push_str(&row.csv_line());
        csv.push('\n');
    }
    write_file(&args.out.join(BENCH_CSV), csv)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_replicate_has_zero_std() {
        let row = BenchRow::new(0.1, Mode::AnomalousAndNormal, vec![0.87]);
        assert_eq!(row.std, 0.0);
        assert_eq!(row.table_cell(), "87.0(0.0)");
    }

    #[test]
    fn population_std() {
        let row = BenchRow::new(0.05, Mode::NormalOnly, vec![0.9, 1.0]);
        assert!((row.mean - 0.95).abs() < 1e-15);
        assert!((row.std - 0.05).abs() < 1e-15);
        assert_eq!(row.csv_line(), "0.05,n,2,0.950000,0.050000,95.0(5.0)");
    }
}
