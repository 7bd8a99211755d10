//! Commands that load a checkpoint and look at a dataset through it.

use std::path::{Path, PathBuf};

use clap::Args;
use gcnad::eval::{evaluate, score_nodes, EvalReport};
use gcnad::io::{checkpoint_precision, load_bundle, load_checkpoint, write_embeddings, write_scores, Bundle, BundlePaths, Checkpoint};
use gcnad::{Error, NormalizedAdjacency, Precision, Real, Result};

use crate::{write_file, DataOpts};

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataOpts,
    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_rescale: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Append the ground-truth label as a third column.
    #[arg(long)]
    pub with_truth: bool,
    #[arg(long)]
    pub no_rescale: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedArgs {
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long)]
    pub no_rescale: bool,
}

fn read_precision(path: &Path) -> Result<Precision> {
    if !path.exists() {
        return Err(Error::Checkpoint(format!("{} does not exist", path.display())));
    }
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    checkpoint_precision(&bytes)
}

fn embeddings<T: Real>(ck: &Checkpoint<T>, bundle: &Bundle) -> Result<ndarray::Array2<T>> {
    let s = NormalizedAdjacency::from_graph(&bundle.graph).cast::<T>();
    let x = bundle.graph.features().mapv(T::from_f64_lossy);
    check_input_dim(ck, x.ncols())?;
    Ok(ck.model.forward(&s, x.view())?.into_embeddings())
}

fn check_input_dim<T: Real>(ck: &Checkpoint<T>, d: usize) -> Result<()> {
    let expected = ck.model.layer_dims()[0];
    if expected != d {
        return Err(Error::Shape(format!(
            "checkpoint expects {expected} input features but the dataset provides {d}"
        )));
    }
    Ok(())
}

fn eval_typed<T: Real>(args: &EvalArgs) -> Result<EvalReport> {
    let ck = load_checkpoint::<T>(&args.checkpoint)?;
    let (bundle, split) = args.data.load(!args.no_rescale)?;
    check_input_dim(&ck, bundle.graph.features().ncols())?;
    evaluate(&ck.model, &ck.center, &bundle.graph, &split, &bundle.truth, ck.config.mode)
}

/// Evaluation report of a checkpoint on a dataset and split.
pub fn eval_report(args: &EvalArgs) -> Result<EvalReport> {
    match read_precision(&args.checkpoint)? {
        Precision::F32 => eval_typed::<f32>(args),
        Precision::F64 => eval_typed::<f64>(args),
    }
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let report = eval_report(args)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(p) => write_file(p, json),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn score_typed<T: Real>(args: &ScoreArgs) -> Result<()> {
    let ck = load_checkpoint::<T>(&args.checkpoint)?;
    let bundle = load_bundle(&BundlePaths::in_dir(&args.data), !args.no_rescale)?;
    let s = NormalizedAdjacency::from_graph(&bundle.graph).cast::<T>();
    let x = bundle.graph.features().mapv(T::from_f64_lossy);
    check_input_dim(&ck, x.ncols())?;
    let ids: Vec<usize> = (0..bundle.graph.n_nodes()).collect();
    let scores = score_nodes(&ck.model, &ck.center, &s, &x, &ids)?;
    write_scores(&args.out, &ids, &scores, args.with_truth.then_some(&bundle.truth))
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    match read_precision(&args.checkpoint)? {
        Precision::F32 => score_typed::<f32>(args),
        Precision::F64 => score_typed::<f64>(args),
    }
}

fn embed_typed<T: Real>(args: &EmbedArgs) -> Result<()> {
    let ck = load_checkpoint::<T>(&args.checkpoint)?;
    let bundle = load_bundle(&BundlePaths::in_dir(&args.data), !args.no_rescale)?;
    write_embeddings(&args.out, &embeddings(&ck, &bundle)?)
}

pub fn cmd_embed(args: &EmbedArgs) -> Result<()> {
    match read_precision(&args.checkpoint)? {
        Precision::F32 => embed_typed::<f32>(args),
        Precision::F64 => embed_typed::<f64>(args),
    }
}
