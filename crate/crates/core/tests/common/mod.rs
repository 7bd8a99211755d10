//! Independent reference implementations used as test oracles.
//!
//! Everything here is written with plain loops over `Vec`s so it shares no
//! code path with the library's sparse and ndarray-based routines.
#![allow(dead_code)]

use gcnad::adjacency::normalized_adjacency;
use gcnad::graph::{build_graph, AttributedGraph};
use gcnad::model::{init_model, Activation, GcnModel};
use gcnad::objective::{objective_grad_embeddings, Center, DEFAULT_CENTER_EPS};
use gcnad::NormalizedAdjacency;
use ndarray::Array2;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with uniform `[0, 1)` attributes.
pub fn random_graph(rng: &mut StdRng, n: usize, p: f64, d: usize) -> AttributedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(p) {
                edges.push((u, v, 1.0));
            }
        }
    }
    let x = Array2::from_shape_simple_fn((n, d), || rng.random::<f64>());
    build_graph(n, edges, x).unwrap().0
}

pub fn random_matrix(rng: &mut StdRng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
}

pub fn dense_adjacency(g: &AttributedGraph) -> Vec<Vec<f64>> {
    let n = g.n_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for e in g.edges() {
        a[e.u][e.v] = e.weight;
        a[e.v][e.u] = e.weight;
    }
    a
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, Vec::len));
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for t in 0..k {
                acc += a[i][t] * b[t][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` by explicit dense products.
pub fn dense_normalized(g: &AttributedGraph) -> Vec<Vec<f64>> {
    let n = g.n_nodes();
    let mut a_tilde = dense_adjacency(g);
    for (i, row) in a_tilde.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let mut d_inv_sqrt = vec![vec![0.0; n]; n];
    for i in 0..n {
        let deg: f64 = a_tilde[i].iter().sum();
        d_inv_sqrt[i][i] = 1.0 / deg.sqrt();
    }
    matmul(&matmul(&d_inv_sqrt, &a_tilde), &d_inv_sqrt)
}

pub fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

fn act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Identity => z,
        Activation::Relu => z.max(0.0),
        Activation::Tanh => z.tanh(),
    }
}

/// Node-by-node propagation:
/// `h_n' = σ( W^T h_n / (d_n+1) + Σ_m a_nm W^T h_m / sqrt((d_n+1)(d_m+1)) )`.
pub fn per_node_forward(g: &AttributedGraph, x: &Array2<f64>, weights: &[Array2<f64>], final_act: Activation) -> Vec<Vec<f64>> {
    let a = dense_adjacency(g);
    let n = g.n_nodes();
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let mut h = to_rows(x);
    for (l, w) in weights.iter().enumerate() {
        let activation = if l + 1 == weights.len() { final_act } else { Activation::Relu };
        let out_dim = w.ncols();
        // W^T h_m for every node
        let wt_h: Vec<Vec<f64>> = h
            .iter()
            .map(|hm| (0..out_dim).map(|k| (0..w.nrows()).map(|j| w[[j, k]] * hm[j]).sum()).collect())
            .collect();
        let mut next = vec![vec![0.0; out_dim]; n];
        for i in 0..n {
            for k in 0..out_dim {
                let mut z = wt_h[i][k] / (deg[i] + 1.0);
                for m in 0..n {
                    if a[i][m] != 0.0 {
                        z += a[i][m] / ((deg[i] + 1.0) * (deg[m] + 1.0)).sqrt() * wt_h[m][k];
                    }
                }
                next[i][k] = act(activation, z);
            }
        }
        h = next;
    }
    h
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `mean_{n∈N} ‖h_n−c‖² − λ · mean_{a∈A, m∈N} sigmoid(s_a − s_m)`, by loops.
pub fn loop_objective(h: &[Vec<f64>], c: &[f64], anomalous: &[usize], normal: &[usize], lambda: f64) -> (f64, f64, f64) {
    let score = |i: usize| h[i].iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let compact = normal.iter().map(|&i| score(i)).sum::<f64>() / normal.len() as f64;
    let auc = if lambda > 0.0 {
        let mut s = 0.0;
        for &a in anomalous {
            for &m in normal {
                s += sigmoid(score(a) - score(m));
            }
        }
        s / (anomalous.len() * normal.len()) as f64
    } else {
        0.0
    };
    (compact - lambda * auc, compact, auc)
}

/// O(n²) pair count with half credit for ties.
pub fn brute_auc(scores: &[f64], is_anomalous: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !is_anomalous[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if is_anomalous[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Denominator floor for gradient checks. Central differences with step 1e-6
/// on a loss of order 1-10 carry roundoff near 1e-9, so entries smaller than
/// this are compared on an absolute 1e-8 scale instead.
pub const FD_FLOOR: f64 = 1e-3;

/// Relative error with a floor on the denominator for near-zero gradients.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Objective of a model evaluated with the loop oracle.
pub fn loss(model: &GcnModel, s: &NormalizedAdjacency, x: &Array2<f64>, c: &Center, a: &[usize], n: &[usize], lambda: f64) -> f64 {
    let h = model.forward(s, x.view()).unwrap().into_embeddings();
    loop_objective(&to_rows(&h), &c.values().to_vec(), a, n, lambda).0
}

/// Max relative error of the analytic weight gradients against central
/// differences with step 1e-6.
pub fn weight_gradient_error(seed: u64, dims: &[usize], lambda: f64) -> f64 {
    let mut r = rng(100 + seed);
    let g = random_graph(&mut r, 12, 0.3, dims[0]);
    let x = g.attributes().clone();
    let s = normalized_adjacency(&g);
    let mut model: GcnModel = init_model(dims, seed, Activation::Identity).unwrap();
    let mut ids: Vec<usize> = (0..12).collect();
    ids.shuffle(&mut r);
    let (a, n) = (ids[..2].to_vec(), ids[2..8].to_vec());
    let h0 = model.forward(&s, x.view()).unwrap().into_embeddings();
    let c = Center::from_mean(h0.view(), &n, DEFAULT_CENTER_EPS).unwrap();

    let cache = model.forward(&s, x.view()).unwrap();
    let gh = objective_grad_embeddings(cache.embeddings().view(), &c, &a, &n, lambda).unwrap();
    let grads = model.backward(cache, gh.view(), &s).unwrap();

    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for l in 0..model.n_layers() {
        let cols = model.weights()[l].ncols();
        for idx in 0..model.weights()[l].len() {
            let (i, j) = (idx / cols, idx % cols);
            let orig = model.weights()[l][[i, j]];
            model.weights_mut()[l][[i, j]] = orig + step;
            let up = loss(&model, &s, &x, &c, &a, &n, lambda);
            model.weights_mut()[l][[i, j]] = orig - step;
            let down = loss(&model, &s, &x, &c, &a, &n, lambda);
            model.weights_mut()[l][[i, j]] = orig;
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(rel_err(grads.layers()[l][[i, j]], numeric, FD_FLOOR));
        }
    }
    worst
}
