//! Experimental data preparation: label binarization, replicate splits,
//! and a planted-anomaly stochastic block model.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, rescale_attributes, AttributedGraph};
use crate::labels::{GroundTruth, Label, LabelSplit};
use crate::rng::{indexed_substream, substream, STREAM_SPLIT, STREAM_SYNTH};

/// Bounded resampling when a split lacks a required class.
pub const DEFAULT_SPLIT_RETRIES: usize = 100;

/// `floor(ratio · n)`, tolerant of ratios like 0.1 that are not exact in binary.
pub fn ratio_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Smallest class becomes anomalous, everything else normal.
///
/// Ties on class size go to the smallest class id. Returns the truth vector
/// and the class that was chosen.
pub fn binarize_labels<L: Ord + Clone>(labels: &[L]) -> Result<(GroundTruth, L)> {
    let mut counts: BTreeMap<&L, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::Invalid(format!(
            "binarization needs at least two classes, found {}",
            counts.len()
        )));
    }
    let (smallest, _) = counts
        .iter()
        .fold(None::<(&L, usize)>, |acc, (&l, &c)| match acc {
            Some((_, best)) if best <= c => acc,
            _ => Some((l, c)),
        })
        .expect("non-empty");
    let smallest = smallest.clone();
    let truth = labels
        .iter()
        .map(|l| if *l == smallest { Label::Anomalous } else { Label::Normal })
        .collect();
    Ok((GroundTruth(truth), smallest))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of all nodes that receive a training label.
    pub labeled_ratio: f64,
    pub validation_ratio: f64,
    pub seed: u64,
    pub replicate: u64,
    /// Require anomalous training labels and both classes in validation
    /// (needed by mode AN).
    pub require_anomalous: bool,
    pub max_retries: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            labeled_ratio: 0.10,
            validation_ratio: 0.10,
            seed: 0,
            replicate: 0,
            require_anomalous: true,
            max_retries: DEFAULT_SPLIT_RETRIES,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: f64| r.is_finite() && (0.0..1.0).contains(&r);
        if !ok(self.labeled_ratio) || self.labeled_ratio == 0.0 || !ok(self.validation_ratio) {
            return Err(Error::Config(format!(
                "ratios must lie in (0, 1): labeled {}, validation {}",
                self.labeled_ratio, self.validation_ratio
            )));
        }
        if self.labeled_ratio + self.validation_ratio >= 1.0 {
            return Err(Error::Config(format!(
                "labeled ratio {} plus validation ratio {} leaves no test nodes",
                self.labeled_ratio, self.validation_ratio
            )));
        }
        Ok(())
    }
}

fn classes(ids: &[usize], truth: &GroundTruth) -> (bool, bool) {
    let anomalous = ids.iter().any(|&i| truth.get(i).is_anomalous());
    let normal = ids.iter().any(|&i| !truth.get(i).is_anomalous());
    (anomalous, normal)
}

/// Uniform (unstratified) labeled/validation/test split.
///
/// `floor(labeled_ratio·N)` nodes get training labels, `floor(validation_ratio·N)`
/// go to validation, the rest to test. Draws that lack a required class are
/// redrawn from the same stream, up to `max_retries` times.
pub fn make_split(truth: &GroundTruth, spec: &SplitSpec) -> Result<LabelSplit> {
    spec.validate()?;
    let n = truth.len();
    let (has_anom, has_norm) = classes(&(0..n).collect::<Vec<_>>(), truth);
    if !has_anom || !has_norm {
        return Err(Error::Invalid("ground truth must contain both classes".into()));
    }
    let n_labeled = ratio_count(spec.labeled_ratio, n);
    let n_validation = ratio_count(spec.validation_ratio, n);
    if n_labeled == 0 {
        return Err(Error::Config(format!(
            "labeled ratio {} selects no nodes out of {n}",
            spec.labeled_ratio
        )));
    }

    let mut rng = indexed_substream(spec.seed, STREAM_SPLIT, spec.replicate);
    let mut ids: Vec<usize> = (0..n).collect();
    for _attempt in 0..=spec.max_retries {
        ids.shuffle(&mut rng);
        let (labeled, rest) = ids.split_at(n_labeled);
        let (validation, test) = rest.split_at(n_validation);

        let mut split = LabelSplit::default();
        for &i in labeled {
            match truth.get(i) {
                Label::Anomalous => split.anomalous_train.push(i),
                Label::Normal => split.normal_train.push(i),
            }
        }
        split.validation = validation.to_vec();
        split.test = test.to_vec();
        split.anomalous_train.sort_unstable();
        split.normal_train.sort_unstable();
        split.validation.sort_unstable();
        split.test.sort_unstable();

        let (val_anom, val_norm) = classes(&split.validation, truth);
        let (test_anom, test_norm) = classes(&split.test, truth);
        let mut ok = !split.normal_train.is_empty() && val_norm && test_anom && test_norm;
        if spec.require_anomalous {
            ok &= !split.anomalous_train.is_empty() && val_anom;
        }
        if ok {
            return Ok(split);
        }
    }
    Err(Error::Invalid(format!(
        "no usable split after {} retries (labeled {n_labeled}, validation {n_validation}, \
         anomalies {} of {n})",
        spec.max_retries,
        truth.n_anomalous()
    )))
}

/// Two-block stochastic block model with shifted anomalous attributes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub anomaly_rate: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub dim: usize,
    pub mu_shift: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_nodes: 500,
            anomaly_rate: 0.05,
            p_in: 0.05,
            p_out: 0.005,
            dim: 16,
            mu_shift: 4.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn n_anomalous(&self) -> usize {
        ratio_count(self.anomaly_rate, self.n_nodes)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.anomaly_rate > 0.0 && self.anomaly_rate < 0.5) {
            return Err(Error::Config(format!(
                "anomaly_rate must lie in (0, 0.5), got {}",
                self.anomaly_rate
            )));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !self.mu_shift.is_finite() {
            return Err(Error::Config("mu_shift must be finite".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("attribute dimension must be >= 1".into()));
        }
        if self.n_anomalous() == 0 {
            return Err(Error::Config(format!(
                "anomaly block is empty for n = {} at rate {}",
                self.n_nodes, self.anomaly_rate
            )));
        }
        Ok(())
    }

    /// Expected number of undirected edges.
    pub fn expected_edges(&self) -> (f64, f64) {
        let a = self.n_anomalous() as f64;
        let m = self.n_nodes as f64 - a;
        let within = m * (m - 1.0) / 2.0 + a * (a - 1.0) / 2.0;
        let across = m * a;
        let mean = within * self.p_in + across * self.p_out;
        let var = within * self.p_in * (1.0 - self.p_in) + across * self.p_out * (1.0 - self.p_out);
        (mean, var)
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(AttributedGraph, GroundTruth)> {
    cfg.validate()?;
    let n = cfg.n_nodes;
    let mut rng = substream(cfg.seed, STREAM_SYNTH);

    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut truth = vec![Label::Normal; n];
    for &i in &ids[..cfg.n_anomalous()] {
        truth[i] = Label::Anomalous;
    }

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if truth[u] == truth[v] { cfg.p_in } else { cfg.p_out };
            if rng.random_bool(p) {
                edges.push((u, v, 1.0));
            }
        }
    }

    let mut direction: Array1<f64> = (0..cfg.dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.dot(&direction).sqrt();
    direction /= norm;
    let mut x = Array2::<f64>::zeros((n, cfg.dim));
    for (i, mut row) in x.rows_mut().into_iter().enumerate() {
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if truth[i].is_anomalous() {
            row.scaled_add(cfg.mu_shift, &direction);
        }
    }
    let x = rescale_attributes(&x)?;
    let (graph, _) = build_graph(n, edges, x)?;
    Ok((graph, GroundTruth(truth)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binarize_examples() {
        let mut labels = vec!["a"; 50];
        labels.extend(vec!["b"; 30]);
        labels.extend(vec!["c"; 20]);
        let (truth, class) = binarize_labels(&labels).unwrap();
        assert_eq!(class, "c");
        assert!((truth.anomaly_rate() - 0.20).abs() < 1e-12);

        let (truth, class) = binarize_labels(&[1, 0, 1, 0]).unwrap();
        assert_eq!(class, 0);
        assert_eq!(truth.n_anomalous(), 2);

        assert!(binarize_labels(&[3, 3, 3]).is_err());
    }

    fn truth_with(n: usize, anomalies: &[usize]) -> GroundTruth {
        let mut t = vec![Label::Normal; n];
        for &a in anomalies {
            t[a] = Label::Anomalous;
        }
        GroundTruth(t)
    }

    #[test]
    fn split_counts_and_determinism() {
        let truth = truth_with(100, &(0..30).collect::<Vec<_>>());
        let spec = SplitSpec {
            seed: 4,
            ..Default::default()
        };
        let a = make_split(&truth, &spec).unwrap();
        assert_eq!(a.n_labeled(), 10);
        assert_eq!(a.validation.len(), 10);
        assert_eq!(a.test.len(), 80);
        assert_eq!(a, make_split(&truth, &spec).unwrap());
        let other = make_split(&truth, &SplitSpec { replicate: 1, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn split_ratio_errors() {
        let truth = truth_with(100, &[0, 1, 2]);
        let spec = SplitSpec {
            labeled_ratio: 0.95,
            ..Default::default()
        };
        assert!(make_split(&truth, &spec).is_err());
        let spec = SplitSpec {
            labeled_ratio: 0.0,
            ..Default::default()
        };
        assert!(make_split(&truth, &spec).is_err());
    }

    #[test]
    fn split_gives_up_when_impossible() {
        // one anomaly cannot be in training, validation and test at once
        let truth = truth_with(50, &[7]);
        let err = make_split(&truth, &SplitSpec::default()).unwrap_err();
        assert!(err.to_string().contains("retries"), "{err}");
        let relaxed = SplitSpec {
            require_anomalous: false,
            ..Default::default()
        };
        let s = make_split(&truth, &relaxed).unwrap();
        assert!(s.test.contains(&7));
    }

    #[test]
    fn synth_is_deterministic_and_sized() {
        let cfg = SynthConfig {
            n_nodes: 120,
            seed: 9,
            ..Default::default()
        };
        let (g1, t1) = generate_synthetic(&cfg).unwrap();
        let (g2, t2) = generate_synthetic(&cfg).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(t1, t2);
        assert_eq!(t1.n_anomalous(), 6);
        assert_eq!(g1.attributes().dim(), (120, 16));
        assert!(g1.attributes().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn synth_config_errors() {
        for bad in [
            SynthConfig { anomaly_rate: 0.0, ..Default::default() },
            SynthConfig { anomaly_rate: 0.5, ..Default::default() },
            SynthConfig { p_in: 1.5, ..Default::default() },
            SynthConfig { n_nodes: 10, anomaly_rate: 0.05, ..Default::default() },
        ] {
            assert!(generate_synthetic(&bad).is_err(), "{bad:?}");
        }
    }
}
