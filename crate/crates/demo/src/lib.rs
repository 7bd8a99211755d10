//! Browser demo: generate a synthetic attributed graph, train the detector
//! on it and hand the results to the page as JSON.
//!
//! The plain functions work natively; the `#[wasm_bindgen]` wrappers at the
//! bottom only translate strings and errors.

use gcnad::datagen::{generate_synthetic, make_split, SplitSpec, SynthConfig};
use gcnad::eval::report_from_scores;
use gcnad::objective::anomaly_scores;
use gcnad::trainer::{train, StopReason};
use gcnad::{rescale_attributes, AttributedGraph, GroundTruth, LabelSplit, Mode, NormalizedAdjacency, Result, TrainConfig};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub nodes: usize,
    pub anomaly_rate: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub dim: usize,
    pub mu_shift: f64,
    pub labeled_ratio: f64,
    pub validation_ratio: f64,
    pub mode: Mode,
    /// Defaults to 10 in mode AN and 0 in mode N.
    pub lambda: Option<f64>,
    pub widths: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            nodes: 300,
            anomaly_rate: 0.05,
            p_in: 0.05,
            p_out: 0.005,
            dim: 16,
            mu_shift: 2.0,
            labeled_ratio: 0.10,
            validation_ratio: 0.10,
            mode: Mode::AnomalousAndNormal,
            lambda: None,
            widths: vec![32, 32, 32],
            learning_rate: 1e-3,
            epochs: 200,
            patience: 50,
            seed: 0,
        }
    }
}

impl DemoConfig {
    fn synth(&self) -> SynthConfig {
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

    fn train_config(&self, lambda: f64) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            lambda,
            layer_widths: self.widths.clone(),
            learning_rate: self.learning_rate,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    fn default_lambda(&self) -> f64 {
        self.lambda.unwrap_or(match self.mode {
            Mode::AnomalousAndNormal => 10.0,
            Mode::NormalOnly => 0.0,
        })
    }
}

struct Dataset {
    graph: AttributedGraph,
    truth: GroundTruth,
    split: LabelSplit,
}

fn dataset(cfg: &DemoConfig) -> Result<Dataset> {
    let (graph, truth) = generate_synthetic(&cfg.synth())?;
    let graph = graph.with_attributes(rescale_attributes(graph.attributes())?)?;
    let split = make_split(
        &truth,
        &SplitSpec {
            labeled_ratio: cfg.labeled_ratio,
            validation_ratio: cfg.validation_ratio,
            seed: cfg.seed,
            require_anomalous: cfg.mode == Mode::AnomalousAndNormal,
            ..Default::default()
        },
    )?;
    Ok(Dataset { graph, truth, split })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    AnomalousTrain,
    NormalTrain,
    Validation,
    Test,
}

fn roles(split: &LabelSplit, n: usize, mode: Mode) -> Vec<Role> {
    let mut out = vec![Role::Test; n];
    for &i in &split.validation {
        out[i] = Role::Validation;
    }
    for &i in &split.normal_train {
        out[i] = Role::NormalTrain;
    }
    // In mode N the anomalous labels are never shown to the model.
    if mode == Mode::AnomalousAndNormal {
        for &i in &split.anomalous_train {
            out[i] = Role::AnomalousTrain;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub nodes: usize,
    pub edges: usize,
    pub anomalies: usize,
    pub mean_degree: f64,
    pub anomalous_train: usize,
    pub normal_train: usize,
    pub validation: usize,
    pub test: usize,
}

pub fn describe(cfg: &DemoConfig) -> Result<DatasetSummary> {
    let d = dataset(cfg)?;
    let n = d.graph.n_nodes();
    Ok(DatasetSummary {
        nodes: n,
        edges: d.graph.n_edges(),
        anomalies: d.truth.n_anomalous(),
        mean_degree: 2.0 * d.graph.n_edges() as f64 / n as f64,
        anomalous_train: d.split.anomalous_train.len(),
        normal_train: d.split.normal_train.len(),
        validation: d.split.validation.len(),
        test: d.split.test.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochPoint {
    pub epoch: usize,
    pub total: f64,
    pub compactness: f64,
    pub auc_reg: f64,
    pub validation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Detection {
    pub lambda: f64,
    pub history: Vec<EpochPoint>,
    pub best_epoch: Option<usize>,
    pub stop_reason: StopReason,
    pub test_auc: Option<f64>,
    pub scores: Vec<f64>,
    pub anomalous: Vec<bool>,
    pub roles: Vec<Role>,
    pub edges: Vec<[usize; 2]>,
    /// Embeddings projected on their two leading principal axes.
    pub projection: Vec<[f64; 2]>,
}

fn detect(d: &Dataset, cfg: &DemoConfig, lambda: f64) -> Result<Detection> {
    let tc = cfg.train_config(lambda);
    let out = train::<f64>(&d.graph, &d.split, &d.truth, &tc)?;
    let s = NormalizedAdjacency::from_graph(&d.graph);
    let h = out.model.forward(&s, d.graph.features().view())?.into_embeddings();
    let scores = anomaly_scores(h.view(), &out.center)?.to_vec();
    let test_auc = report_from_scores(scores.clone(), &d.split, &d.truth, cfg.mode)
        .ok()
        .map(|r| r.test_auc);
    let n = d.graph.n_nodes();
    Ok(Detection {
        lambda,
        history: out
            .history
            .records
            .iter()
            .map(|r| EpochPoint {
                epoch: r.epoch,
                total: r.total,
                compactness: r.compactness,
                auc_reg: r.auc_reg,
                validation: r.validation,
            })
            .collect(),
        best_epoch: out.history.best_epoch,
        stop_reason: out.history.stop_reason,
        test_auc,
        scores,
        anomalous: d.truth.is_anomalous_mask(&(0..n).collect::<Vec<_>>()),
        roles: roles(&d.split, n, cfg.mode),
        edges: d.graph.edges().iter().map(|e| [e.u, e.v]).collect(),
        projection: project_2d(&h),
    })
}

pub fn run_detection(cfg: &DemoConfig) -> Result<Detection> {
    detect(&dataset(cfg)?, cfg, cfg.default_lambda())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub test_auc: Option<f64>,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
}

/// Train once per λ on the same graph and split.
pub fn compare_lambdas(cfg: &DemoConfig, lambdas: &[f64]) -> Result<Vec<LambdaPoint>> {
    let d = dataset(cfg)?;
    lambdas
        .iter()
        .map(|&l| {
            let r = detect(&d, cfg, l)?;
            Ok(LambdaPoint {
                lambda: l,
                test_auc: r.test_auc,
                best_epoch: r.best_epoch,
                epochs_run: r.history.len(),
            })
        })
        .collect()
}

const POWER_ITERATIONS: usize = 200;

fn leading_eigenvector(cov: &Array2<f64>) -> Vec<f64> {
    let k = cov.nrows();
    // Fixed, non-symmetric start so the result does not depend on an RNG.
    let mut v: Vec<f64> = (0..k).map(|i| 1.0 + i as f64 / k as f64).collect();
    for _ in 0..POWER_ITERATIONS {
        let w: Vec<f64> = (0..k).map(|i| (0..k).map(|j| cov[[i, j]] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return vec![0.0; k];
        }
        v = w.into_iter().map(|x| x / norm).collect();
    }
    v
}

/// PCA to two dimensions by power iteration with deflation.
pub fn project_2d(h: &Array2<f64>) -> Vec<[f64; 2]> {
    let (n, k) = h.dim();
    if n == 0 {
        return Vec::new();
    }
    let mean = h.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let centered = h - &mean;
    let mut cov = centered.t().dot(&centered) / n as f64;
    let first = leading_eigenvector(&cov);
    let lambda1: f64 = (0..k)
        .map(|i| first[i] * (0..k).map(|j| cov[[i, j]] * first[j]).sum::<f64>())
        .sum();
    for i in 0..k {
        for j in 0..k {
            cov[[i, j]] -= lambda1 * first[i] * first[j];
        }
    }
    let second = leading_eigenvector(&cov);
    centered
        .rows()
        .into_iter()
        .map(|r| {
            let dot = |v: &[f64]| r.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            [dot(&first), dot(&second)]
        })
        .collect()
}

fn parse_config(json: &str) -> std::result::Result<DemoConfig, JsValue> {
    if json.trim().is_empty() {
        return Ok(DemoConfig::default());
    }
    serde_json::from_str(json).map_err(|e| JsValue::from_str(&format!("bad config: {e}")))
}

fn to_js<S: Serialize>(r: Result<S>) -> std::result::Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = describeDataset)]
pub fn describe_dataset_js(config_json: &str) -> std::result::Result<String, JsValue> {
    to_js(describe(&parse_config(config_json)?))
}

#[wasm_bindgen(js_name = runDetection)]
pub fn run_detection_js(config_json: &str) -> std::result::Result<String, JsValue> {
    to_js(run_detection(&parse_config(config_json)?))
}

#[wasm_bindgen(js_name = compareLambdas)]
pub fn compare_lambdas_js(config_json: &str, lambdas_json: &str) -> std::result::Result<String, JsValue> {
    let cfg = parse_config(config_json)?;
    let lambdas: Vec<f64> =
        serde_json::from_str(lambdas_json).map_err(|e| JsValue::from_str(&format!("bad lambda list: {e}")))?;
    to_js(compare_lambdas(&cfg, &lambdas))
}
