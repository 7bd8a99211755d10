//! Rank-based AUC and test-set evaluation.

use std::cmp::Ordering;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::adjacency::NormalizedAdjacency;
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::labels::{GroundTruth, LabelSplit};
use crate::model::GcnModel;
use crate::objective::{anomaly_scores, Center};
use crate::real::Real;
use crate::trainer::Mode;

/// Mann–Whitney AUC: the fraction of (anomalous, normal) pairs ranked
/// correctly, ties counting half. `is_anomalous[i]` labels `scores[i]`.
pub fn auc(scores: &[f64], is_anomalous: &[bool]) -> Result<f64> {
    if scores.len() != is_anomalous.len() {
        return Err(Error::Shape(format!(
            "{} scores but {} labels",
            scores.len(),
            is_anomalous.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Invalid("AUC input contains NaN scores".into()));
    }
    let n_pos = is_anomalous.iter().filter(|&&a| a).count() as u64;
    let n_neg = scores.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Invalid(
            "AUC needs at least one anomalous and one normal node".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Twice the rank sum of the positives; tied blocks share the average rank,
    // so doubling keeps everything integral.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j, average (i + 1 + j) / 2
        let pos_in_block = order[i..j].iter().filter(|&&k| is_anomalous[k]).count() as u64;
        twice_rank_sum += pos_in_block * (i as u64 + 1 + j as u64);
        i = j;
    }
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / 2.0 / (n_pos * n_neg) as f64)
}

/// Scores for `ids` after one forward pass.
pub fn score_nodes<T: Real>(
    model: &GcnModel<T>,
    center: &Center<T>,
    s: &NormalizedAdjacency<T>,
    x: &Array2<T>,
    ids: &[usize],
) -> Result<Vec<f64>> {
    if let Some(bad) = ids.iter().find(|&&i| i >= s.n()) {
        return Err(Error::Invalid(format!(
            "node {bad} out of range for {} nodes",
            s.n()
        )));
    }
    if ids.is_empty() {
        return Ok(Vec::new());
    }
    let cache = model.forward(s, x.view())?;
    let scores = anomaly_scores(cache.embeddings().view(), center)?;
    Ok(ids.iter().map(|&i| scores[i].to_f64_lossless()).collect())
}

/// How the validation set is judged, by training mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ValidationCriterion {
    /// Validation AUC (mode AN); larger is better.
    Auc(f64),
    /// Mean score of validation nodes whose truth is normal (mode N); smaller is better.
    MeanNormalScore(f64),
}

impl ValidationCriterion {
    pub fn value(self) -> f64 {
        match self {
            ValidationCriterion::Auc(v) | ValidationCriterion::MeanNormalScore(v) => v,
        }
    }

    /// Strict improvement of `self` over `other` (same kind assumed).
    pub fn better_than(self, other: Self) -> bool {
        match (self, other) {
            (ValidationCriterion::Auc(a), ValidationCriterion::Auc(b)) => a > b,
            (ValidationCriterion::MeanNormalScore(a), ValidationCriterion::MeanNormalScore(b)) => a < b,
            _ => false,
        }
    }
}

/// Validation criterion computed from all-node scores.
pub fn validation_criterion(scores: &[f64], split: &LabelSplit, truth: &GroundTruth, mode: Mode) -> Result<ValidationCriterion> {
    match mode {
        Mode::AnomalousAndNormal => {
            let sub: Vec<f64> = split.validation.iter().map(|&i| scores[i]).collect();
            let mask = truth.is_anomalous_mask(&split.validation);
            auc(&sub, &mask)
                .map(ValidationCriterion::Auc)
                .map_err(|e| Error::Invalid(format!("validation set: {e}")))
        }
        Mode::NormalOnly => {
            let normal: Vec<f64> = split
                .validation
                .iter()
                .filter(|&&i| !truth.get(i).is_anomalous())
                .map(|&i| scores[i])
                .collect();
            if normal.is_empty() {
                return Err(Error::Invalid("validation set has no normal nodes".into()));
            }
            Ok(ValidationCriterion::MeanNormalScore(
                normal.iter().sum::<f64>() / normal.len() as f64,
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub n_nodes: usize,
    pub n_test: usize,
    pub n_test_anomalous: usize,
    pub n_validation: usize,
    pub n_validation_anomalous: usize,
    pub n_anomalous_train: usize,
    pub n_normal_train: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub test_auc: f64,
    pub validation: ValidationCriterion,
    pub counts: EvalCounts,
    /// Anomaly score of every node, indexed by node id.
    pub scores: Vec<f64>,
}

/// Score every node once and report test AUC plus the validation criterion.
pub fn evaluate<T: Real>(
    model: &GcnModel<T>,
    center: &Center<T>,
    graph: &AttributedGraph,
    split: &LabelSplit,
    truth: &GroundTruth,
    mode: Mode,
) -> Result<EvalReport> {
    let n = graph.n_nodes();
    if truth.len() != n {
        return Err(Error::Shape(format!(
            "ground truth covers {} nodes, graph has {n}",
            truth.len()
        )));
    }
    split.validate(n, mode == Mode::AnomalousAndNormal)?;
    let s = NormalizedAdjacency::from_graph(graph).cast::<T>();
    let x = graph.features().mapv(T::from_f64_lossy);
    let all: Vec<usize> = (0..n).collect();
    let scores = score_nodes(model, center, &s, &x, &all)?;
    Ok(report_from_scores(scores, split, truth, mode)?)
}

/// [`evaluate`] for precomputed all-node scores.
pub fn report_from_scores(scores: Vec<f64>, split: &LabelSplit, truth: &GroundTruth, mode: Mode) -> Result<EvalReport> {
    let test_scores: Vec<f64> = split.test.iter().map(|&i| scores[i]).collect();
    let test_mask = truth.is_anomalous_mask(&split.test);
    let test_auc = auc(&test_scores, &test_mask).map_err(|e| Error::Invalid(format!("test set: {e}")))?;
    let validation = validation_criterion(&scores, split, truth, mode)?;
    let counts = EvalCounts {
        n_nodes: scores.len(),
        n_test: split.test.len(),
        n_test_anomalous: test_mask.iter().filter(|&&a| a).count(),
        n_validation: split.validation.len(),
        n_validation_anomalous: truth.is_anomalous_mask(&split.validation).iter().filter(|&&a| a).count(),
        n_anomalous_train: if mode == Mode::AnomalousAndNormal {
            split.anomalous_train.len()
        } else {
            0
        },
        n_normal_train: split.normal_train.len(),
    };
    Ok(EvalReport {
        test_auc,
        validation,
        counts,
        scores,
    })
}
