//! Hypersphere anomaly scores and the training objective.
//!
//! The objective is `L = L_nor − λ·R_auc`, where `L_nor` is the mean score of
//! normal-labeled nodes and `R_auc` is the mean sigmoid of score differences
//! over all (anomalous, normal) labeled pairs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adjacency::NormalizedAdjacency;
use crate::error::{Error, Result};
use crate::model::GcnModel;
use crate::real::Real;
use crate::rng::{substream, STREAM_PAIRS};

/// Minimum center norm; smaller centers are pushed out coordinate-wise.
pub const DEFAULT_CENTER_EPS: f64 = 1e-3;

/// Above this many (anomalous, normal) pairs the AUC term is estimated on a
/// fixed uniform sample of pairs.
pub const DEFAULT_MAX_PAIRS: usize = 10_000_000;

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Fixed hypersphere center. Never updated by training.
#[derive(Debug, Clone, PartialEq)]
pub struct Center<T: Real = f64> {
    values: Array1<T>,
    guard_engaged: bool,
}

impl<T: Real> Center<T> {
    /// Wrap an explicit center; rejects centers whose norm is not above `eps`.
    pub fn new(values: Array1<T>, eps: f64) -> Result<Self> {
        let norm = values.iter().map(|v| v.to_f64_lossless().powi(2)).sum::<f64>().sqrt();
        if !(norm > eps) {
            return Err(Error::Invalid(format!(
                "center norm {norm} is not above the collapse threshold {eps}"
            )));
        }
        Ok(Center {
            values,
            guard_engaged: false,
        })
    }

    /// Restore a center exactly as stored (checkpoints).
    pub(crate) fn from_parts(values: Array1<T>, guard_engaged: bool) -> Self {
        Center {
            values,
            guard_engaged,
        }
    }

    /// Mean of `embeddings` over `ids`, with the collapse guard applied.
    pub fn from_mean(embeddings: ArrayView2<'_, T>, ids: &[usize], eps: f64) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Invalid("center needs at least one normal node".into()));
        }
        check_ids(ids, embeddings.nrows(), "normal")?;
        let mut mean = Array1::<T>::zeros(embeddings.ncols());
        for &i in ids {
            mean += &embeddings.row(i);
        }
        let count = T::from_usize(ids.len()).unwrap();
        mean.mapv_inplace(|v| v / count);

        let norm = mean.iter().map(|v| v.to_f64_lossless().powi(2)).sum::<f64>().sqrt();
        let mut guard_engaged = false;
        if norm <= eps {
            guard_engaged = true;
            let e = T::from_f64_lossy(eps);
            mean.mapv_inplace(|v| {
                if v.abs() >= e {
                    v
                } else if v < T::zero() {
                    -e
                } else {
                    e
                }
            });
        }
        Ok(Center {
            values: mean,
            guard_engaged,
        })
    }

    pub fn values(&self) -> ArrayView1<'_, T> {
        self.values.view()
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Whether the collapse guard had to move the center.
    pub fn guard_engaged(&self) -> bool {
        self.guard_engaged
    }
}

/// Center at the mean normal embedding of an initial forward pass.
pub fn init_center<T: Real>(
    model: &GcnModel<T>,
    s: &NormalizedAdjacency<T>,
    x: ArrayView2<'_, T>,
    normal_ids: &[usize],
    eps: f64,
) -> Result<Center<T>> {
    if normal_ids.is_empty() {
        return Err(Error::Invalid("center needs at least one normal node".into()));
    }
    let cache = model.forward(s, x)?;
    Center::from_mean(cache.embeddings().view(), normal_ids, eps)
}

fn check_ids(ids: &[usize], n: usize, what: &str) -> Result<()> {
    match ids.iter().find(|&&i| i >= n) {
        Some(i) => Err(Error::Invalid(format!(
            "{what} id {i} out of range for {n} nodes"
        ))),
        None => Ok(()),
    }
}

/// `a(v_n) = ‖h_n − c‖²` for every row of `h`.
pub fn anomaly_scores<T: Real>(h: ArrayView2<'_, T>, c: &Center<T>) -> Result<Array1<T>> {
    if h.ncols() != c.dim() {
        return Err(Error::Shape(format!(
            "embeddings have width {} but the center has {}",
            h.ncols(),
            c.dim()
        )));
    }
    let center = c.values();
    Ok(h.map_axis(Axis(1), |row| {
        row.iter()
            .zip(center.iter())
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
    }))
}

/// Mean score over the normal-labeled nodes.
pub fn compactness_loss<T: Real>(scores: ArrayView1<'_, T>, normal_ids: &[usize]) -> Result<T> {
    if normal_ids.is_empty() {
        return Err(Error::Invalid("compactness loss needs at least one normal node".into()));
    }
    check_ids(normal_ids, scores.len(), "normal")?;
    let sum = normal_ids.iter().fold(T::zero(), |acc, &i| acc + scores[i]);
    Ok(sum / T::from_usize(normal_ids.len()).unwrap())
}

/// Which (anomalous, normal) pairs enter the AUC term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSampling {
    /// Pair count above which a uniform subsample of this size is used.
    pub max_pairs: usize,
    pub seed: u64,
}

impl Default for PairSampling {
    fn default() -> Self {
        PairSampling {
            max_pairs: DEFAULT_MAX_PAIRS,
            seed: 0,
        }
    }
}

enum Pairs {
    Full,
    Sampled(Vec<(usize, usize)>),
}

impl PairSampling {
    fn plan(&self, n_anomalous: usize, n_normal: usize) -> Pairs {
        let total = n_anomalous.saturating_mul(n_normal);
        if total <= self.max_pairs {
            return Pairs::Full;
        }
        let mut rng = substream(self.seed, STREAM_PAIRS);
        let mut pairs: Vec<(usize, usize)> = (0..self.max_pairs)
            .map(|_| (rng.random_range(0..n_anomalous), rng.random_range(0..n_normal)))
            .collect();
        pairs.sort_unstable();
        Pairs::Sampled(pairs)
    }
}

fn check_labels<T: Real>(scores: ArrayView1<'_, T>, anomalous: &[usize], normal: &[usize]) -> Result<()> {
    if anomalous.is_empty() {
        return Err(Error::Invalid(
            "AUC term needs at least one anomalous node (use lambda = 0 without anomalies)".into(),
        ));
    }
    if normal.is_empty() {
        return Err(Error::Invalid("AUC term needs at least one normal node".into()));
    }
    check_ids(anomalous, scores.len(), "anomalous")?;
    check_ids(normal, scores.len(), "normal")
}

/// Mean of `f(a(v_n) − a(v_m))` over anomalous `n`, normal `m`, with the
/// default pair sampling (exact below ten million pairs).
pub fn auc_regularizer<T: Real>(scores: ArrayView1<'_, T>, anomalous: &[usize], normal: &[usize]) -> Result<T> {
    auc_regularizer_with(scores, anomalous, normal, &PairSampling::default())
}

pub fn auc_regularizer_with<T: Real>(
    scores: ArrayView1<'_, T>,
    anomalous: &[usize],
    normal: &[usize],
    sampling: &PairSampling,
) -> Result<T> {
    check_labels(scores, anomalous, normal)?;
    let (sum, count) = match sampling.plan(anomalous.len(), normal.len()) {
        Pairs::Full => {
            let mut sum = T::zero();
            for &a in anomalous {
                for &m in normal {
                    sum = sum + sigmoid(scores[a] - scores[m]);
                }
            }
            (sum, anomalous.len() * normal.len())
        }
        Pairs::Sampled(pairs) => {
            let sum = pairs.iter().fold(T::zero(), |acc, &(i, j)| {
                acc + sigmoid(scores[anomalous[i]] - scores[normal[j]])
            });
            (sum, pairs.len())
        }
    };
    Ok(sum / T::from_usize(count).unwrap())
}

/// Components of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub total: f64,
    pub compactness: f64,
    pub auc_reg: f64,
    pub lambda: f64,
}

/// Objective weight and pair sampling, bundled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub lambda: f64,
    pub sampling: PairSampling,
}

impl Objective {
    pub fn new(lambda: f64) -> Self {
        Objective {
            lambda,
            sampling: PairSampling::default(),
        }
    }

    fn check_lambda(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn value<T: Real>(&self, h: ArrayView2<'_, T>, c: &Center<T>, anomalous: &[usize], normal: &[usize]) -> Result<ObjectiveValue> {
        self.check_lambda()?;
        let scores = anomaly_scores(h, c)?;
        self.value_from_scores(scores.view(), anomalous, normal)
    }

    pub fn value_from_scores<T: Real>(&self, scores: ArrayView1<'_, T>, anomalous: &[usize], normal: &[usize]) -> Result<ObjectiveValue> {
        self.check_lambda()?;
        let compactness = compactness_loss(scores, normal)?.to_f64_lossless();
        let auc_reg = if self.lambda > 0.0 {
            auc_regularizer_with(scores, anomalous, normal, &self.sampling)?.to_f64_lossless()
        } else {
            0.0
        };
        Ok(ObjectiveValue {
            total: compactness - self.lambda * auc_reg,
            compactness,
            auc_reg,
            lambda: self.lambda,
        })
    }

    /// `dL/dH`; rows of nodes without a training label are zero.
    pub fn grad_embeddings<T: Real>(&self, h: ArrayView2<'_, T>, c: &Center<T>, anomalous: &[usize], normal: &[usize]) -> Result<Array2<T>> {
        self.check_lambda()?;
        let scores = anomaly_scores(h, c)?;
        if normal.is_empty() {
            return Err(Error::Invalid("objective needs at least one normal node".into()));
        }
        check_ids(normal, scores.len(), "normal")?;

        // dL/ds for every node.
        let mut coeff = Array1::<T>::zeros(scores.len());
        let inv_normal = T::one() / T::from_usize(normal.len()).unwrap();
        for &m in normal {
            coeff[m] = coeff[m] + inv_normal;
        }
        if self.lambda > 0.0 {
            check_labels(scores.view(), anomalous, normal)?;
            let lambda = T::from_f64_lossy(self.lambda);
            let mut pair_term = |a: usize, m: usize, weight: T| {
                let f = sigmoid(scores[a] - scores[m]);
                let d = weight * f * (T::one() - f);
                coeff[a] = coeff[a] - d;
                coeff[m] = coeff[m] + d;
            };
            match self.sampling.plan(anomalous.len(), normal.len()) {
                Pairs::Full => {
                    let weight = lambda / T::from_usize(anomalous.len() * normal.len()).unwrap();
                    for &a in anomalous {
                        for &m in normal {
                            pair_term(a, m, weight);
                        }
                    }
                }
                Pairs::Sampled(pairs) => {
                    let weight = lambda / T::from_usize(pairs.len()).unwrap();
                    for (i, j) in pairs {
                        pair_term(anomalous[i], normal[j], weight);
                    }
                }
            }
        }

        let two = T::from_f64_lossy(2.0);
        let center = c.values();
        let mut grad = Array2::<T>::zeros(h.raw_dim());
        for (n, mut row) in grad.rows_mut().into_iter().enumerate() {
            let k = coeff[n];
            if k == T::zero() {
                continue;
            }
            for ((g, &hv), &cv) in row.iter_mut().zip(h.row(n)).zip(center.iter()) {
                *g = two * k * (hv - cv);
            }
        }
        Ok(grad)
    }
}

/// `L = L_nor − λ·R_auc` with default pair sampling.
pub fn objective<T: Real>(h: ArrayView2<'_, T>, c: &Center<T>, anomalous: &[usize], normal: &[usize], lambda: f64) -> Result<ObjectiveValue> {
    Objective::new(lambda).value(h, c, anomalous, normal)
}

/// `dL/dH` for [`objective`].
pub fn objective_grad_embeddings<T: Real>(
    h: ArrayView2<'_, T>,
    c: &Center<T>,
    anomalous: &[usize],
    normal: &[usize],
    lambda: f64,
) -> Result<Array2<T>> {
    Objective::new(lambda).grad_embeddings(h, c, anomalous, normal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn center(v: Array1<f64>) -> Center<f64> {
        Center::new(v, DEFAULT_CENTER_EPS).unwrap()
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!(sigmoid(1000.0f64), 1.0);
        assert_eq!(sigmoid(-1000.0f64), 0.0);
        assert!((sigmoid(50.0f64) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn score_examples() {
        let c = center(array![1.0, 1.0]);
        let h = array![[1.0, 1.0], [4.0, 5.0]];
        assert_eq!(anomaly_scores(h.view(), &c).unwrap().to_vec(), vec![0.0, 25.0]);
        assert!(anomaly_scores(array![[1.0, 2.0, 3.0]].view(), &c).is_err());
    }

    #[test]
    fn compactness_examples() {
        let s = array![2.0, 9.0, 4.0];
        assert_eq!(compactness_loss(s.view(), &[0, 2]).unwrap(), 3.0);
        assert_eq!(compactness_loss(array![0.0, 0.0].view(), &[0, 1]).unwrap(), 0.0);
        assert!(compactness_loss(s.view(), &[]).is_err());
    }

    #[test]
    fn auc_regularizer_examples() {
        let s = array![1.0f64, 1.0];
        assert_eq!(auc_regularizer(s.view(), &[0], &[1]).unwrap(), 0.5);
        let s = array![51.0f64, 1.0];
        assert!((auc_regularizer(s.view(), &[0], &[1]).unwrap() - 1.0).abs() < 1e-12);
        let s = array![2.0f64, 3.0, 1.0];
        let expected = (0.731_058_578_630_004_9 + 0.880_797_077_977_882_3) / 2.0;
        assert!((auc_regularizer(s.view(), &[0, 1], &[2]).unwrap() - expected).abs() < 1e-15);
        assert!(auc_regularizer(s.view(), &[], &[2]).is_err());
    }

    #[test]
    fn sampled_pairs_are_deterministic_and_close() {
        let s = Array1::from_shape_fn(60, |i| (i as f64 * 0.37).sin() * 3.0);
        let a: Vec<usize> = (0..20).collect();
        let n: Vec<usize> = (20..60).collect();
        let exact = auc_regularizer(s.view(), &a, &n).unwrap();
        let sampling = PairSampling { max_pairs: 400, seed: 5 };
        let x = auc_regularizer_with(s.view(), &a, &n, &sampling).unwrap();
        let y = auc_regularizer_with(s.view(), &a, &n, &sampling).unwrap();
        assert_eq!(x, y);
        assert!((x - exact).abs() < 0.05, "{x} vs {exact}");
    }

    #[test]
    fn objective_arithmetic() {
        let c = center(array![1.0, 0.0]);
        let h = array![[1.0, 0.0], [1.0, 0.0]];
        let v = objective(h.view(), &c, &[], &[0, 1], 0.0).unwrap();
        assert_eq!(v.total, 0.0);
        let v = ObjectiveValue {
            total: 0.4 - 10.0 * 0.9,
            compactness: 0.4,
            auc_reg: 0.9,
            lambda: 10.0,
        };
        assert!((v.total - -8.6).abs() < 1e-12);
        assert!(objective(h.view(), &c, &[], &[0, 1], 1.0).is_err());
        assert!(objective(h.view(), &c, &[0], &[1], -1.0).is_err());
    }

    #[test]
    fn gradient_examples() {
        let c = center(array![1.0, 2.0]);
        let g = objective_grad_embeddings(array![[1.0, 2.0]].view(), &c, &[], &[0], 0.0).unwrap();
        assert_eq!(g, array![[0.0, 0.0]]);
        let g = objective_grad_embeddings(array![[2.0, 2.0]].view(), &c, &[], &[0], 0.0).unwrap();
        assert_eq!(g, array![[2.0, 0.0]]);
        // unlabeled rows stay zero
        let h = array![[2.0, 2.0], [5.0, 5.0], [0.0, 3.0]];
        let g = objective_grad_embeddings(h.view(), &c, &[2], &[0], 3.0).unwrap();
        assert_eq!(g.row(1).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn center_from_mean_and_guard() {
        let h = array![[1.0, 0.0], [0.0, 1.0], [9.0, 9.0]];
        let c = Center::from_mean(h.view(), &[0, 1], DEFAULT_CENTER_EPS).unwrap();
        assert_eq!(c.values().to_vec(), vec![0.5, 0.5]);
        assert!(!c.guard_engaged());

        let z = Array2::<f64>::zeros((3, 3));
        let c = Center::from_mean(z.view(), &[0, 2], DEFAULT_CENTER_EPS).unwrap();
        assert_eq!(c.values().to_vec(), vec![1e-3; 3]);
        assert!(c.guard_engaged());

        let tiny = array![[-1e-5, 2e-4]];
        let c = Center::from_mean(tiny.view(), &[0], DEFAULT_CENTER_EPS).unwrap();
        assert_eq!(c.values().to_vec(), vec![-1e-3, 1e-3]);

        assert!(Center::from_mean(h.view(), &[], DEFAULT_CENTER_EPS).is_err());
        assert!(Center::new(array![0.0, 0.0], DEFAULT_CENTER_EPS).is_err());
    }
}
