//! Bias-free multi-layer graph convolution and its reverse-mode gradient.

use std::fmt;

use ndarray::{Array2, ArrayView2, Zip};
use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::adjacency::NormalizedAdjacency;
use crate::error::{Error, Result};
use crate::real::{Precision, Real};
use crate::rng::{substream, STREAM_INIT};

/// Activations larger than this abort the forward pass.
pub const ACTIVATION_LIMIT: f64 = 1e12;

/// Width of every hidden layer and of the embedding in the default architecture.
pub const DEFAULT_WIDTH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Identity,
    Relu,
    /// Bounded; accepted on the final layer only with a collapse warning.
    Tanh,
}

impl Activation {
    pub fn is_bounded(self) -> bool {
        matches!(self, Activation::Tanh)
    }

    fn apply<T: Real>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and the output `h`.
    fn derivative<T: Real>(self, z: T, h: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - h * h,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(format!("unknown activation '{other}'")),
        }
    }
}

/// Default architecture for `input_dim` features: three propagation layers of width 32.
pub fn default_layer_dims(input_dim: usize) -> Vec<usize> {
    vec![input_dim, DEFAULT_WIDTH, DEFAULT_WIDTH, DEFAULT_WIDTH]
}

/// Graph convolutional network without bias terms.
///
/// Hidden layers use the rectifier; the final layer uses `final_activation`.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel<T: Real = f64> {
    layer_dims: Vec<usize>,
    weights: Vec<Array2<T>>,
    final_activation: Activation,
    generation: u64,
}

/// Glorot-uniform bound for a `fan_in x fan_out` matrix.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::Config(format!(
            "layer_dims needs at least an input and an output width, got {layer_dims:?}"
        )));
    }
    if layer_dims.contains(&0) {
        return Err(Error::Config(format!(
            "layer widths must be >= 1, got {layer_dims:?}"
        )));
    }
    Ok(())
}

/// Glorot-uniform initialization, deterministic in `seed`.
pub fn init_model<T: Real>(layer_dims: &[usize], seed: u64, final_activation: Activation) -> Result<GcnModel<T>> {
    check_dims(layer_dims)?;
    let mut rng = substream(seed, STREAM_INIT);
    let weights = layer_dims
        .windows(2)
        .map(|w| {
            let bound = glorot_bound(w[0], w[1]);
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            Array2::from_shape_simple_fn((w[0], w[1]), || T::from_f64_lossy(dist.sample(&mut rng)))
        })
        .collect();
    Ok(GcnModel {
        layer_dims: layer_dims.to_vec(),
        weights,
        final_activation,
        generation: 0,
    })
}

impl<T: Real> GcnModel<T> {
    /// Assemble a model from explicit weights, checking that shapes chain.
    pub fn from_weights(weights: Vec<Array2<T>>, final_activation: Activation) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("model needs at least one layer".into()));
        }
        let mut layer_dims = vec![weights[0].nrows()];
        for (l, w) in weights.iter().enumerate() {
            if w.nrows() != *layer_dims.last().unwrap() {
                return Err(Error::Shape(format!(
                    "weight {l} has {} rows, expected {}",
                    w.nrows(),
                    layer_dims.last().unwrap()
                )));
            }
            layer_dims.push(w.ncols());
        }
        check_dims(&layer_dims)?;
        Ok(GcnModel {
            layer_dims,
            weights,
            final_activation,
            generation: 0,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn embedding_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn final_activation(&self) -> Activation {
        self.final_activation
    }

    pub fn precision(&self) -> Precision {
        T::PRECISION
    }

    pub fn weights(&self) -> &[Array2<T>] {
        &self.weights
    }

    /// Mutable access to the weights. Invalidates outstanding forward caches.
    pub fn weights_mut(&mut self) -> &mut [Array2<T>] {
        self.generation += 1;
        &mut self.weights
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum()
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.final_activation
        } else {
            Activation::Relu
        }
    }

    /// `H^(l+1) = σ(S · H^(l) · W^(l))` for every layer, starting from `H^(0) = x`.
    pub fn forward<'x>(&self, s: &NormalizedAdjacency<T>, x: ArrayView2<'x, T>) -> Result<ForwardCache<'x, T>> {
        if x.ncols() != self.layer_dims[0] {
            return Err(Error::Shape(format!(
                "features have {} columns but the model expects {}",
                x.ncols(),
                self.layer_dims[0]
            )));
        }
        if x.nrows() != s.n() {
            return Err(Error::Shape(format!(
                "features have {} rows but the graph has {} nodes",
                x.nrows(),
                s.n()
            )));
        }
        let limit = T::from_f64_lossy(ACTIVATION_LIMIT);
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut post: Vec<Array2<T>> = Vec::with_capacity(self.weights.len());
        for (l, w) in self.weights.iter().enumerate() {
            let input = if l == 0 { x } else { post[l - 1].view() };
            let z = s.propagate(input.dot(w).view())?;
            if let Some(bad) = z.iter().find(|v| !(v.abs() <= limit)) {
                return Err(Error::Numeric(format!(
                    "layer {l}: activation {bad} is non-finite or exceeds {ACTIVATION_LIMIT:e}"
                )));
            }
            let act = self.activation(l);
            post.push(z.mapv(|v| act.apply(v)));
            pre.push(z);
        }
        Ok(ForwardCache {
            input: x,
            pre,
            post,
            generation: self.generation,
            layer_dims: self.layer_dims.clone(),
        })
    }

    /// Gradients of a scalar loss w.r.t. every weight matrix, given `dL/dH`.
    pub fn backward(&self, cache: ForwardCache<'_, T>, grad_h: ArrayView2<'_, T>, s: &NormalizedAdjacency<T>) -> Result<Gradients<T>> {
        if cache.generation != self.generation || cache.layer_dims != self.layer_dims {
            return Err(Error::Invalid(
                "forward cache does not belong to the current model weights".into(),
            ));
        }
        let h = cache.embeddings();
        if grad_h.dim() != h.dim() {
            return Err(Error::Shape(format!(
                "embedding gradient is {:?}, embeddings are {:?}",
                grad_h.dim(),
                h.dim()
            )));
        }
        let n_layers = self.weights.len();
        let mut grads = vec![Array2::zeros((0, 0)); n_layers];
        let mut upstream = grad_h.to_owned();
        for l in (0..n_layers).rev() {
            let act = self.activation(l);
            Zip::from(&mut upstream)
                .and(&cache.pre[l])
                .and(&cache.post[l])
                .for_each(|g, &z, &out| *g = *g * act.derivative(z, out));
            // S is symmetric, so S^T · dZ = S · dZ.
            let p = s.propagate(upstream.view())?;
            let input = if l == 0 { cache.input } else { cache.post[l - 1].view() };
            grads[l] = input.t().dot(&p);
            if l > 0 {
                upstream = p.dot(&self.weights[l].t());
            }
        }
        Ok(Gradients(grads))
    }
}

/// Intermediates of one forward pass, consumed by [`GcnModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<'x, T: Real> {
    input: ArrayView2<'x, T>,
    pre: Vec<Array2<T>>,
    post: Vec<Array2<T>>,
    generation: u64,
    layer_dims: Vec<usize>,
}

impl<T: Real> ForwardCache<'_, T> {
    /// Final node embeddings `H = H^(L)`, one row per node.
    pub fn embeddings(&self) -> &Array2<T> {
        self.post.last().expect("at least one layer")
    }

    pub fn into_embeddings(mut self) -> Array2<T> {
        self.post.pop().expect("at least one layer")
    }

    pub fn pre_activations(&self) -> &[Array2<T>] {
        &self.pre
    }

    pub fn post_activations(&self) -> &[Array2<T>] {
        &self.post
    }
}

/// Per-layer weight gradients, same shapes as the model's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T>(pub Vec<Array2<T>>);

impl<T: Real> Gradients<T> {
    pub fn layers(&self) -> &[Array2<T>] {
        &self.0
    }

    /// Add `coeff · W` to each layer (an L2 penalty's gradient).
    pub fn add_weight_decay(&mut self, weights: &[Array2<T>], coeff: T) {
        for (g, w) in self.0.iter_mut().zip(weights) {
            g.scaled_add(coeff, w);
        }
    }
}
