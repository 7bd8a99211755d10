//! Dataset preparation commands.

use std::path::PathBuf;

use clap::Args;
use gcnad::datagen::{generate_synthetic, make_split, SplitSpec, SynthConfig, DEFAULT_SPLIT_RETRIES};
use gcnad::io::{convert_citation, read_labels, write_bundle, write_split, ConversionReport, LABELS_FILE};
use gcnad::{Mode, Result};

use crate::create_dir;

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 500)]
    pub nodes: usize,
    #[arg(long, default_value_t = 0.05)]
    pub anomaly_rate: f64,
    /// Edge probability inside a block.
    #[arg(long, default_value_t = 0.05)]
    pub p_in: f64,
    /// Edge probability across blocks.
    #[arg(long, default_value_t = 0.005)]
    pub p_out: f64,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Length of the attribute shift applied to anomalies.
    #[arg(long, default_value_t = 4.0)]
    pub mu_shift: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write split.json with this labeled ratio.
    #[arg(long, value_name = "RATIO")]
    pub labeled_ratio: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn config(&self) -> SynthConfig {
        SynthConfig {
            n_nodes: self.nodes,
            anomaly_rate: self.anomaly_rate,
            p_in: self.p_in,
            p_out: self.p_out,
            dim: self.dim,
            mu_shift: self.mu_shift,
            seed: self.seed,
        }
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let (graph, truth) = generate_synthetic(&args.config())?;
    let split = match args.labeled_ratio {
        Some(r) => Some(make_split(
            &truth,
            &SplitSpec {
                labeled_ratio: r,
                seed: args.seed,
                ..Default::default()
            },
        )?),
        None => None,
    };
    create_dir(&args.out)?;
    write_bundle(&args.out, &graph, &truth, split.as_ref())?;
    log::info!(
        "{} nodes, {} edges, {} anomalies written to {}",
        graph.n_nodes(),
        graph.n_edges(),
        truth.n_anomalous(),
        args.out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Dataset directory; only its labels.csv is read.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Fraction of nodes that receive training labels.
    #[arg(long, default_value_t = 0.10)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0.10)]
    pub val_ratio: f64,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Mode `an` redraws splits without labeled anomalies; mode `n` accepts them.
    #[arg(long, default_value = "an")]
    pub mode: Mode,
    #[arg(long, default_value_t = DEFAULT_SPLIT_RETRIES)]
    pub max_retries: usize,
    /// Directory for split_00.json, split_01.json, ...
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn split_file_name(replicate: usize) -> String {
    format!("split_{replicate:02}.json")
}

/// Write one split file per replicate and return their paths.
pub fn cmd_split(args: &SplitArgs) -> Result<Vec<PathBuf>> {
    let truth = read_labels(&args.data.join(LABELS_FILE))?;
    let mut paths = Vec::new();
    let mut splits = Vec::new();
    for r in 0..args.replicates {
        let spec = SplitSpec {
            labeled_ratio: args.ratio,
            validation_ratio: args.val_ratio,
            seed: args.seed,
            replicate: r as u64,
            require_anomalous: args.mode == Mode::AnomalousAndNormal,
            max_retries: args.max_retries,
        };
        splits.push(make_split(&truth, &spec)?);
    }
    create_dir(&args.out)?;
    for (r, split) in splits.iter().enumerate() {
        let p = args.out.join(split_file_name(r));
        write_split(&p, split)?;
        paths.push(p);
    }
    Ok(paths)
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    /// `<paper id> <attributes...> <class>` per line.
    #[arg(long, value_name = "FILE")]
    pub content: PathBuf,
    /// `<cited id> <citing id>` per line.
    #[arg(long, value_name = "FILE")]
    pub cites: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

pub fn cmd_convert_citation(args: &ConvertArgs) -> Result<ConversionReport> {
    convert_citation(&args.content, &args.cites, &args.out)
}
