//! Symmetrically normalized adjacency with self-connections, stored in
//! compressed-row form.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::real::Real;

/// `S = D̃^{-1/2} (A + I) D̃^{-1/2}` in CSR layout.
///
/// Rows ascend, and columns ascend within each row, so every product with
/// this operator accumulates in one fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency<T = f64> {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

impl NormalizedAdjacency<f64> {
    pub fn from_graph(g: &AttributedGraph) -> Self {
        let n = g.n_nodes();
        let deg = g.degrees();

        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| vec![(i, 1.0)]).collect();
        for e in g.edges() {
            rows[e.u].push((e.v, e.weight));
            rows[e.v].push((e.u, e.weight));
        }

        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(n + 2 * g.n_edges());
        let mut values = Vec::with_capacity(n + 2 * g.n_edges());
        row_offsets.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            for (j, a) in row {
                col_indices.push(j);
                values.push(a / ((deg[i] + 1.0) * (deg[j] + 1.0)).sqrt());
            }
            row_offsets.push(col_indices.len());
        }
        NormalizedAdjacency {
            n,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Convert the stored values to another precision.
    pub fn cast<T: Real>(&self) -> NormalizedAdjacency<T> {
        NormalizedAdjacency {
            n: self.n,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values: self.values.iter().map(|&v| T::from_f64_lossy(v)).collect(),
        }
    }
}

impl<T: Real> NormalizedAdjacency<T> {
    /// Identity operator: what an edgeless graph on `n` nodes normalizes to.
    pub fn identity(n: usize) -> Self {
        NormalizedAdjacency {
            n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Stored entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.col_indices[span.clone()].binary_search(&j) {
            Ok(k) => self.values[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// Sparse-dense product `S · M`.
    pub fn propagate(&self, m: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if m.nrows() != self.n {
            return Err(Error::Shape(format!(
                "operator is {n}x{n} but the dense operand has {} rows",
                m.nrows(),
                n = self.n
            )));
        }
        if m.ncols() == 0 {
            return Err(Error::Shape("dense operand has no columns".into()));
        }
        let mut out = Array2::zeros((self.n, m.ncols()));
        for (i, mut out_row) in out.rows_mut().into_iter().enumerate() {
            for (j, v) in self.row(i) {
                out_row.scaled_add(v, &m.row(j));
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`NormalizedAdjacency::from_graph`].
pub fn normalized_adjacency(g: &AttributedGraph) -> NormalizedAdjacency {
    NormalizedAdjacency::from_graph(g)
}

/// Free-function form of [`NormalizedAdjacency::propagate`].
pub fn propagate<T: Real>(s: &NormalizedAdjacency<T>, m: ArrayView2<'_, T>) -> Result<Array2<T>> {
    s.propagate(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use ndarray::{array, Array2};

    fn unweighted(n: usize, edges: &[(usize, usize)]) -> AttributedGraph {
        build_graph(n, edges.iter().map(|&(u, v)| (u, v, 1.0)), Array2::zeros((n, 0)))
            .unwrap()
            .0
    }

    #[test]
    fn single_node() {
        let s = normalized_adjacency(&unweighted(1, &[]));
        assert_eq!(s.to_dense(), array![[1.0]]);
    }

    #[test]
    fn two_nodes_one_edge() {
        let s = normalized_adjacency(&unweighted(2, &[(0, 1)]));
        assert_eq!(s.to_dense(), array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn path_graph_entries() {
        let s = normalized_adjacency(&unweighted(3, &[(0, 1), (1, 2)]));
        assert!((s.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        assert!((s.get(1, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.get(0, 2), 0.0);
        assert_eq!(s.col_indices(), &[0, 1, 0, 1, 2, 1, 2]);
    }

    #[test]
    fn edgeless_is_identity_and_propagates_unchanged() {
        let s = normalized_adjacency(&unweighted(4, &[]));
        assert_eq!(s, NormalizedAdjacency::identity(4));
        let m = array![[1.5, -2.0], [0.0, 3.25], [7.0, 1e-9], [-0.5, 4.0]];
        assert_eq!(s.propagate(m.view()).unwrap(), m);
    }

    #[test]
    fn zero_operand_gives_zero() {
        let s = normalized_adjacency(&unweighted(3, &[(0, 1), (1, 2)]));
        let z = Array2::<f64>::zeros((3, 2));
        assert_eq!(s.propagate(z.view()).unwrap(), z);
    }

    #[test]
    fn shape_errors() {
        let s = normalized_adjacency(&unweighted(3, &[(0, 1)]));
        assert!(s.propagate(Array2::<f64>::zeros((2, 2)).view()).is_err());
        assert!(s.propagate(Array2::<f64>::zeros((3, 0)).view()).is_err());
    }
}
