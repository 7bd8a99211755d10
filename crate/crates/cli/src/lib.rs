//! Command-line front end: dataset preparation, training, scoring and
//! replicate benchmarks over the `gcnad` library.
//!
//! Every subcommand is also callable as a function so that tests can drive
//! the exact code path the binary uses.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gcnad::io::{load_bundle, read_split, Bundle, BundlePaths};
use gcnad::{Activation, Error, ErrorKind, LabelSplit, Mode, Precision, Result, TrainConfig};

pub mod bench;
pub mod config_file;
pub mod data;
pub mod inspect;
pub mod train;

pub use bench::{cmd_bench, BenchArgs, BenchRow};
pub use data::{cmd_convert_citation, cmd_split, cmd_synth, ConvertArgs, SplitArgs, SynthArgs};
pub use inspect::{cmd_embed, cmd_eval, cmd_score, EmbedArgs, EvalArgs, ScoreArgs};
pub use train::{cmd_train, TrainArgs, TrainSummary};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Version plus the `git describe` of the source tree at build time.
pub fn version_string() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("GCNAD_GIT_DESCRIBE"))
}

#[derive(Debug, Parser)]
#[command(name = "gcnad", version, about = "Semi-supervised anomaly detection on attributed graphs")]
#[command(args_override_self = true)]
pub struct Cli {
    /// Flat `key = value` file of flag defaults; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a detector and write checkpoint, metrics stream and manifest.
    Train(TrainArgs),
    /// Report test AUC and the validation criterion of a checkpoint as JSON.
    Eval(EvalArgs),
    /// Write `node,score` for every node.
    Score(ScoreArgs),
    /// Write `node,h_1..h_K` embeddings for every node.
    Embed(EmbedArgs),
    /// Generate a planted-anomaly block-model dataset.
    Synth(SynthArgs),
    /// Draw replicate labeled/validation/test splits.
    Split(SplitArgs),
    /// Train and evaluate over label ratios and replicate splits.
    Bench(BenchArgs),
    /// Convert a raw citation network (`.content` + `.cites`) into a bundle.
    ConvertCitation(ConvertArgs),
}

/// Model and optimizer flags shared by `train` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct ModelOpts {
    /// `an` uses anomalous and normal labels; `n` uses normal labels only.
    #[arg(long, default_value = "an")]
    pub mode: Mode,
    /// AUC regularizer weight. Defaults to 10 in mode `an` and 0 in mode `n`.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Try each value and keep the best by validation criterion.
    #[arg(long, value_delimiter = ',', value_name = "L1,L2,..")]
    pub lambda_grid: Option<Vec<f64>>,
    /// Layer widths after the input; the last is the embedding size.
    #[arg(long, value_delimiter = ',', default_value = "32,32,32")]
    pub widths: Vec<usize>,
    #[arg(long, default_value = "identity")]
    pub final_activation: Activation,
    #[arg(long = "lr", default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 50)]
    pub patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "f64")]
    pub precision: Precision,
    #[arg(long = "l2", default_value_t = 0.0)]
    pub l2_weight: f64,
    #[arg(long, default_value_t = gcnad::objective::DEFAULT_CENTER_EPS)]
    pub center_eps: f64,
    #[arg(long, default_value_t = gcnad::objective::DEFAULT_MAX_PAIRS)]
    pub max_pairs: usize,
    /// Keep attributes as read instead of min-max rescaling each column.
    #[arg(long)]
    pub no_rescale: bool,
}

impl ModelOpts {
    pub fn lambdas(&self) -> Vec<f64> {
        match (&self.lambda_grid, self.lambda) {
            (Some(grid), _) => grid.clone(),
            (None, Some(l)) => vec![l],
            (None, None) => vec![if self.mode == Mode::NormalOnly { 0.0 } else { 10.0 }],
        }
    }

    pub fn config(&self, lambda: f64) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            lambda,
            layer_widths: self.widths.clone(),
            final_activation: self.final_activation,
            learning_rate: self.learning_rate,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
            precision: self.precision,
            l2_weight: self.l2_weight,
            center_eps: self.center_eps,
            max_pairs: self.max_pairs,
        }
    }

    /// Every grid point as a checked config.
    pub fn configs(&self) -> Result<Vec<TrainConfig>> {
        let lambdas = self.lambdas();
        if lambdas.is_empty() {
            return Err(Error::Config("lambda grid is empty".into()));
        }
        lambdas
            .into_iter()
            .map(|l| {
                let cfg = self.config(l);
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

/// Bundle directory and optional split override.
#[derive(Debug, Clone, Args)]
pub struct DataOpts {
    /// Dataset directory (edges.tsv, labels.csv, optional attributes and split.json).
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Split file; defaults to split.json inside the dataset directory.
    #[arg(long, value_name = "FILE")]
    pub split: Option<PathBuf>,
}

impl DataOpts {
    pub fn paths(&self) -> BundlePaths {
        let mut paths = BundlePaths::in_dir(&self.data);
        if self.split.is_some() {
            paths.split = self.split.clone();
        }
        paths
    }

    /// Load the bundle and require a split.
    pub fn load(&self, rescale: bool) -> Result<(Bundle, LabelSplit)> {
        let paths = self.paths();
        let mut bundle = load_bundle(&BundlePaths { split: None, ..paths.clone() }, rescale)?;
        let split_path = paths.split.ok_or_else(|| {
            Error::Config(format!(
                "no split: pass --split or place split.json in {}",
                self.data.display()
            ))
        })?;
        let split = read_split(&split_path)?;
        split.validate(bundle.graph.n_nodes(), false)?;
        bundle.split = Some(split.clone());
        Ok((bundle, split))
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => EXIT_CONFIG,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numeric => EXIT_NUMERIC,
    }
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match config_file::expand(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => {
            let s = cmd_train(&a)?;
            println!("{}", serde_json::to_string_pretty(&s.brief())?);
        }
        Command::Eval(a) => cmd_eval(&a)?,
        Command::Score(a) => cmd_score(&a)?,
        Command::Embed(a) => cmd_embed(&a)?,
        Command::Synth(a) => cmd_synth(&a)?,
        Command::Split(a) => {
            for p in cmd_split(&a)? {
                println!("{}", p.display());
            }
        }
        Command::Bench(a) => {
            for row in cmd_bench(&a)? {
                println!("{}", row.csv_line());
            }
        }
        Command::ConvertCitation(a) => {
            let report = cmd_convert_citation(&a)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

pub(crate) fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
