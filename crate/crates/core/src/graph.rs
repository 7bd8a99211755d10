//! Attributed graph representation and attribute preprocessing.

use std::borrow::Cow;
use std::collections::BTreeMap;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

/// One undirected edge in canonical orientation (`u < v`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// What `build_graph` had to clean up while canonicalizing the raw edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub duplicates_merged: usize,
    pub self_loops_dropped: usize,
}

/// Undirected graph with a dense `N x D` attribute matrix.
///
/// Edges are stored once, as `(u, v)` with `u < v`, sorted lexicographically.
/// Self loops never appear: the propagation operator adds exactly one
/// self-connection per node on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    n_nodes: usize,
    edges: Vec<Edge>,
    attributes: Array2<f64>,
}

impl AttributedGraph {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Raw attribute matrix; may have zero columns.
    pub fn attributes(&self) -> &Array2<f64> {
        &self.attributes
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.ncols()
    }

    /// Features fed to the first layer: the attributes, or the identity when
    /// the graph carries none.
    pub fn features(&self) -> Cow<'_, Array2<f64>> {
        if self.attributes.ncols() == 0 {
            Cow::Owned(identity_attributes(self.n_nodes))
        } else {
            Cow::Borrowed(&self.attributes)
        }
    }

    /// Weighted degree of every node (self-connection excluded).
    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n_nodes];
        for e in &self.edges {
            deg[e.u] += e.weight;
            deg[e.v] += e.weight;
        }
        deg
    }

    /// Replace the attribute matrix, keeping the structure.
    pub fn with_attributes(&self, attributes: Array2<f64>) -> Result<Self> {
        check_attributes(self.n_nodes, &attributes)?;
        Ok(AttributedGraph {
            n_nodes: self.n_nodes,
            edges: self.edges.clone(),
            attributes,
        })
    }

    /// Relabel nodes so that old node `i` becomes node `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_nodes;
        if perm.len() != n {
            return Err(Error::Shape(format!(
                "permutation has length {} but graph has {n} nodes",
                perm.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Invalid("relabeling is not a permutation".into()));
            }
        }
        let mut attributes = Array2::zeros(self.attributes.raw_dim());
        for (old, row) in self.attributes.axis_iter(Axis(0)).enumerate() {
            attributes.row_mut(perm[old]).assign(&row);
        }
        let raw = self
            .edges
            .iter()
            .map(|e| (perm[e.u], perm[e.v], e.weight));
        let (g, _) = build_graph(n, raw, attributes)?;
        Ok(g)
    }
}

fn check_attributes(n_nodes: usize, attributes: &Array2<f64>) -> Result<()> {
    if attributes.nrows() != n_nodes {
        return Err(Error::Shape(format!(
            "attribute matrix has {} rows but the graph has {n_nodes} nodes",
            attributes.nrows()
        )));
    }
    if let Some(((r, c), _)) = attributes.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Invalid(format!(
            "attribute ({r}, {c}) is not finite"
        )));
    }
    Ok(())
}

/// Canonicalize a raw edge list into an [`AttributedGraph`].
///
/// Reverse and repeated entries are merged when they agree on the weight;
/// self loops are dropped and counted in the returned report.
pub fn build_graph<I>(n_nodes: usize, raw_edges: I, attributes: Array2<f64>) -> Result<(AttributedGraph, BuildReport)>
where
    I: IntoIterator<Item = (usize, usize, f64)>,
{
    if n_nodes == 0 {
        return Err(Error::Invalid("graph must have at least one node".into()));
    }
    check_attributes(n_nodes, &attributes)?;

    let mut report = BuildReport::default();
    let mut canonical: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (u, v, w) in raw_edges {
        if u >= n_nodes || v >= n_nodes {
            return Err(Error::Invalid(format!(
                "edge ({u}, {v}) references a node id out of range (n = {n_nodes})"
            )));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Invalid(format!(
                "edge ({u}, {v}) has non-positive or non-finite weight {w}"
            )));
        }
        if u == v {
            report.self_loops_dropped += 1;
            continue;
        }
        let key = (u.min(v), u.max(v));
        match canonical.get(&key) {
            Some(&prev) if prev == w => report.duplicates_merged += 1,
            Some(&prev) => {
                return Err(Error::Invalid(format!(
                    "edge ({}, {}) given with conflicting weights {prev} and {w}",
                    key.0, key.1
                )))
            }
            None => {
                canonical.insert(key, w);
            }
        }
    }
    if report.self_loops_dropped > 0 {
        log::warn!(
            "dropped {} self loop(s); every node already receives one self-connection",
            report.self_loops_dropped
        );
    }

    let edges = canonical
        .into_iter()
        .map(|((u, v), weight)| Edge { u, v, weight })
        .collect();
    Ok((
        AttributedGraph {
            n_nodes,
            edges,
            attributes,
        },
        report,
    ))
}

/// Min-max rescale every column to `[0, 1]`; constant columns become zero.
pub fn rescale_attributes(x: &Array2<f64>) -> Result<Array2<f64>> {
    if let Some(((r, c), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Invalid(format!("attribute ({r}, {c}) is not finite")));
    }
    let mut out = x.clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| (v - lo) / range);
        } else {
            col.fill(0.0);
        }
    }
    Ok(out)
}

/// `n x n` identity, the stand-in feature matrix for attribute-free graphs.
pub fn identity_attributes(n: usize) -> Array2<f64> {
    Array2::eye(n)
}
