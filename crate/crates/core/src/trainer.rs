//! Full-batch training with Adam and validation-based early stopping.

use std::fmt;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::adjacency::NormalizedAdjacency;
use crate::error::{Error, Result};
use crate::eval::{validation_criterion, ValidationCriterion};
use crate::graph::AttributedGraph;
use crate::labels::{GroundTruth, LabelSplit};
use crate::model::{init_model, Activation, GcnModel, Gradients, DEFAULT_WIDTH};
use crate::objective::{anomaly_scores, init_center, Center, Objective, PairSampling, DEFAULT_CENTER_EPS, DEFAULT_MAX_PAIRS};
use crate::real::{Precision, Real};

/// Which training labels the objective may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Mode {
    /// Anomalous and normal labels; validation by AUC.
    #[default]
    #[serde(rename = "an")]
    AnomalousAndNormal,
    /// Normal labels only (λ = 0); validation by mean normal score.
    #[serde(rename = "n")]
    NormalOnly,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::AnomalousAndNormal => "an",
            Mode::NormalOnly => "n",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "an" => Ok(Mode::AnomalousAndNormal),
            "n" => Ok(Mode::NormalOnly),
            other => Err(format!("unknown mode '{other}' (expected an or n)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    pub lambda: f64,
    /// Widths after the input layer; the last one is the embedding size.
    pub layer_widths: Vec<usize>,
    pub final_activation: Activation,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub precision: Precision,
    /// Coefficient of `½·Σ‖W‖²`; zero disables the penalty.
    pub l2_weight: f64,
    pub center_eps: f64,
    pub max_pairs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::AnomalousAndNormal,
            lambda: 10.0,
            layer_widths: vec![DEFAULT_WIDTH; 3],
            final_activation: Activation::Identity,
            learning_rate: 1e-3,
            max_epochs: 500,
            patience: 50,
            seed: 0,
            precision: Precision::F64,
            l2_weight: 0.0,
            center_eps: DEFAULT_CENTER_EPS,
            max_pairs: DEFAULT_MAX_PAIRS,
        }
    }
}

impl TrainConfig {
    pub fn layer_dims(&self, input_dim: usize) -> Vec<usize> {
        std::iter::once(input_dim).chain(self.layer_widths.iter().copied()).collect()
    }

    /// Label-independent checks. Returns warnings for accepted but risky settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.mode == Mode::NormalOnly && self.lambda != 0.0 {
            return Err(Error::Config("mode N requires lambda = 0".into()));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience ({}) must not exceed max_epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if self.layer_widths.is_empty() || self.layer_widths.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be non-empty and >= 1, got {:?}",
                self.layer_widths
            )));
        }
        if !(self.l2_weight.is_finite() && self.l2_weight >= 0.0) {
            return Err(Error::Config(format!("l2_weight must be >= 0, got {}", self.l2_weight)));
        }
        if !(self.center_eps.is_finite() && self.center_eps > 0.0) {
            return Err(Error::Config(format!("center_eps must be > 0, got {}", self.center_eps)));
        }
        if self.max_pairs == 0 {
            return Err(Error::Config("max_pairs must be >= 1".into()));
        }
        let mut warnings = Vec::new();
        if self.final_activation.is_bounded() {
            warnings.push(format!(
                "final activation '{}' is bounded; embeddings may collapse onto the center",
                self.final_activation
            ));
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(warnings)
    }

    fn objective(&self) -> Objective {
        Objective {
            lambda: self.lambda,
            sampling: PairSampling {
                max_pairs: self.max_pairs,
                seed: self.seed,
            },
        }
    }
}

/// Config checks that also need the label split.
pub fn validate_config(cfg: &TrainConfig, split: &LabelSplit) -> Result<Vec<String>> {
    let warnings = cfg.validate()?;
    if split.normal_train.is_empty() {
        return Err(Error::Config("training needs at least one normal-labeled node".into()));
    }
    if cfg.mode == Mode::AnomalousAndNormal && split.anomalous_train.is_empty() {
        return Err(Error::Config(if cfg.lambda > 0.0 {
            "lambda > 0 requires at least one anomalous-labeled node".into()
        } else {
            "mode AN requires at least one anomalous-labeled node".into()
        }));
    }
    Ok(warnings)
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Moment estimates for bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real = f64> {
    pub m: Vec<Array2<T>>,
    pub v: Vec<Array2<T>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(weights: &[Array2<T>]) -> Self {
        AdamState {
            m: weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            v: weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

/// One Adam update of `weights` in place.
pub fn adam_step<T: Real>(weights: &mut [Array2<T>], grads: &Gradients<T>, state: &mut AdamState<T>, lr: f64) -> Result<()> {
    let g = grads.layers();
    if g.len() != weights.len() || state.m.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} weight matrices, {} gradients, {} moment buffers",
            weights.len(),
            g.len(),
            state.m.len()
        )));
    }
    for ((w, g), m) in weights.iter().zip(g).zip(&state.m) {
        if w.dim() != g.dim() || w.dim() != m.dim() {
            return Err(Error::Shape(format!(
                "weight {:?}, gradient {:?}, moment {:?}",
                w.dim(),
                g.dim(),
                m.dim()
            )));
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let b1 = T::from_f64_lossy(state.beta1);
    let b2 = T::from_f64_lossy(state.beta2);
    let one = T::one();
    let corr1 = T::from_f64_lossy(1.0 - state.beta1.powf(t));
    let corr2 = T::from_f64_lossy(1.0 - state.beta2.powf(t));
    let lr = T::from_f64_lossy(lr);
    let eps = T::from_f64_lossy(state.eps);
    for (((w, g), m), v) in weights.iter_mut().zip(g).zip(&mut state.m).zip(&mut state.v) {
        Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
            *m = b1 * *m + (one - b1) * g;
            *v = b2 * *v + (one - b2) * g * g;
            let m_hat = *m / corr1;
            let v_hat = *v / corr2;
            *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopping,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxEpochs => "max_epochs",
            StopReason::EarlyStopping => "early_stopping",
        })
    }
}

/// Metrics of one epoch, measured on the weights at the start of that epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub compactness: f64,
    pub auc_reg: f64,
    pub validation: f64,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.best_epoch.map(|e| &self.records[e])
    }
}

pub struct TrainOutcome<T: Real = f64> {
    pub model: GcnModel<T>,
    pub center: Center<T>,
    pub history: TrainHistory,
    /// Criterion of the returned weights, if any epoch ran.
    pub best_validation: Option<ValidationCriterion>,
}

/// Train on `graph` with the labels in `split`; see [`train_with`].
pub fn train<T: Real>(graph: &AttributedGraph, split: &LabelSplit, truth: &GroundTruth, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with(graph, split, truth, cfg, |_| {})
}

/// Full-batch training. `on_epoch` sees every record as it is produced.
///
/// The center is fixed from the initial forward pass. Each epoch evaluates
/// the current weights (objective plus validation criterion), then takes one
/// Adam step. The weights of the best validation epoch are returned; ties on
/// the criterion go to the epoch with the lower training objective.
pub fn train_with<T: Real, F>(
    graph: &AttributedGraph,
    split: &LabelSplit,
    truth: &GroundTruth,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome<T>>
where
    F: FnMut(&EpochRecord),
{
    if T::PRECISION != cfg.precision {
        return Err(Error::Config(format!(
            "config asks for {} but training was instantiated with {}",
            cfg.precision,
            T::PRECISION
        )));
    }
    validate_config(cfg, split)?;
    let n = graph.n_nodes();
    split.validate(n, cfg.mode == Mode::AnomalousAndNormal)?;
    if truth.len() != n {
        return Err(Error::Shape(format!(
            "ground truth covers {} nodes, graph has {n}",
            truth.len()
        )));
    }

    let s = NormalizedAdjacency::from_graph(graph).cast::<T>();
    let x = graph.features().mapv(T::from_f64_lossy);
    let anomalous: &[usize] = match cfg.mode {
        Mode::AnomalousAndNormal => &split.anomalous_train,
        Mode::NormalOnly => &[],
    };
    let normal = &split.normal_train;

    let mut model = init_model::<T>(&cfg.layer_dims(x.ncols()), cfg.seed, cfg.final_activation)?;
    let center = init_center(&model, &s, x.view(), normal, cfg.center_eps)?;
    let objective = cfg.objective();
    let mut adam = AdamState::new(model.weights());
    let l2 = T::from_f64_lossy(cfg.l2_weight);

    let clock = Stopwatch::start();
    let mut records = Vec::new();
    let mut best: Option<(usize, ValidationCriterion, f64, Vec<Array2<T>>)> = None;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 0..cfg.max_epochs {
        let numeric = |e: Error| match e {
            Error::Numeric(msg) => Error::Numeric(format!("epoch {epoch}: {msg}")),
            other => other,
        };
        let cache = model.forward(&s, x.view()).map_err(numeric)?;
        let scores = anomaly_scores(cache.embeddings().view(), &center)?;
        let value = objective.value_from_scores(scores.view(), anomalous, normal)?;
        if !value.total.is_finite() {
            return Err(Error::Numeric(format!(
                "epoch {epoch}: objective is {} (compactness {}, auc term {})",
                value.total, value.compactness, value.auc_reg
            )));
        }
        let scores64: Vec<f64> = scores.iter().map(|v| v.to_f64_lossless()).collect();
        let criterion = validation_criterion(&scores64, split, truth, cfg.mode)?;

        let record = EpochRecord {
            epoch,
            total: value.total,
            compactness: value.compactness,
            auc_reg: value.auc_reg,
            validation: criterion.value(),
            elapsed_secs: clock.elapsed_secs(),
        };
        on_epoch(&record);
        records.push(record);

        let improved = match &best {
            None => true,
            Some((_, c, total, _)) => criterion.better_than(*c) || (!c.better_than(criterion) && value.total < *total),
        };
        if improved {
            best = Some((epoch, criterion, value.total, model.weights().to_vec()));
        }
        let since_best = epoch - best.as_ref().map_or(epoch, |b| b.0);
        if since_best > 0 && since_best >= cfg.patience {
            stop_reason = StopReason::EarlyStopping;
            break;
        }

        let grad_h = objective.grad_embeddings(cache.embeddings().view(), &center, anomalous, normal)?;
        let mut grads = model.backward(cache, grad_h.view(), &s)?;
        if cfg.l2_weight > 0.0 {
            grads.add_weight_decay(model.weights(), l2);
        }
        adam_step(model.weights_mut(), &grads, &mut adam, cfg.learning_rate)?;
    }

    let (best_epoch, best_validation) = match best {
        Some((epoch, criterion, _, weights)) => {
            for (w, b) in model.weights_mut().iter_mut().zip(weights) {
                *w = b;
            }
            (Some(epoch), Some(criterion))
        }
        None => (None, None),
    };
    Ok(TrainOutcome {
        model,
        center,
        history: TrainHistory {
            records,
            best_epoch,
            stop_reason,
        },
        best_validation,
    })
}

/// Wall-clock timer; reads zero where no monotonic clock is available.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed_secs(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}
