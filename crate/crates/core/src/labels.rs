use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Anomalous,
    Normal,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Anomalous => "anomalous",
            Label::Normal => "normal",
        })
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "anomalous" => Ok(Label::Anomalous),
            "normal" => Ok(Label::Normal),
            other => Err(format!("unknown label '{other}' (expected anomalous or normal)")),
        }
    }
}

/// Ground-truth label of every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth(pub Vec<Label>);

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, node: usize) -> Label {
        self.0[node]
    }

    pub fn n_anomalous(&self) -> usize {
        self.0.iter().filter(|l| l.is_anomalous()).count()
    }

    pub fn anomaly_rate(&self) -> f64 {
        self.n_anomalous() as f64 / self.0.len() as f64
    }

    pub fn is_anomalous_mask(&self, ids: &[usize]) -> Vec<bool> {
        ids.iter().map(|&i| self.0[i].is_anomalous()).collect()
    }
}

/// Training, validation, and test node ids for one experiment replicate.
///
/// Ground truth for validation and test nodes lives in [`GroundTruth`]; the
/// split itself only carries supervision.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelSplit {
    pub anomalous_train: Vec<usize>,
    pub normal_train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl LabelSplit {
    /// Checks ranges and pairwise disjointness.
    ///
    /// With `include_anomalous == false` the anomalous training ids are not
    /// inspected at all.
    pub fn validate(&self, n_nodes: usize, include_anomalous: bool) -> Result<()> {
        let mut seen = HashSet::new();
        let mut groups: Vec<(&str, &[usize])> = vec![
            ("normal_train", &self.normal_train),
            ("validation", &self.validation),
            ("test", &self.test),
        ];
        if include_anomalous {
            groups.insert(0, ("anomalous_train", &self.anomalous_train));
        }
        for (name, ids) in groups {
            for &i in ids {
                if i >= n_nodes {
                    return Err(Error::Invalid(format!(
                        "split {name} contains node {i}, but the graph has {n_nodes} nodes"
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::Invalid(format!(
                        "node {i} appears more than once across split groups"
                    )));
                }
            }
        }
        if include_anomalous && self.anomalous_train.len() > self.normal_train.len() {
            log::warn!(
                "split has more anomalous ({}) than normal ({}) training labels",
                self.anomalous_train.len(),
                self.normal_train.len()
            );
        }
        Ok(())
    }

    pub fn n_labeled(&self) -> usize {
        self.anomalous_train.len() + self.normal_train.len()
    }
}
