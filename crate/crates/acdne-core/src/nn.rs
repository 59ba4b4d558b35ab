//! Dense feed-forward layers with exact analytic backpropagation and a
//! momentum SGD optimizer.
//!
//! Everything is `f64` and single-threaded on purpose: training runs must
//! be bit-reproducible for a given seed, which rules out reduction-order
//! nondeterminism.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            other => Err(CoreError::Argument(format!("unknown activation {other:?}"))),
        }
    }
}

/// One dense layer: `post = activation(input . w + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Uniform Glorot initialization: weights from
    /// `U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))`, zero
    /// biases. Weights are drawn in row-major order so a given RNG state
    /// always produces the same layer.
    pub fn glorot(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data: Vec<f64> = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        DenseLayer {
            w: Array2::from_shape_vec((in_dim, out_dim), data)
                .expect("vector length matches shape"),
            b: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Per-layer state captured by [`forward`] for the matching backward
/// pass: the layer input, pre-activation, and post-activation.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub input: Array2<f64>,
    pub pre: Array2<f64>,
    pub post: Array2<f64>,
}

/// Gradients of one layer's parameters.
#[derive(Debug, Clone)]
pub struct GradPair {
    pub dw: Array2<f64>,
    pub db: Array1<f64>,
}

impl GradPair {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        GradPair {
            dw: Array2::zeros(layer.w.raw_dim()),
            db: Array1::zeros(layer.b.raw_dim()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dw.iter().all(|v| v.is_finite()) && self.db.iter().all(|v| v.is_finite())
    }
}

fn apply_activation(activation: Activation, pre: &Array2<f64>) -> Array2<f64> {
    match activation {
        Activation::Identity => pre.clone(),
        Activation::Relu => pre.mapv(|v| if v > 0.0 { v } else { 0.0 }),
        Activation::Sigmoid => pre.mapv(|v| 1.0 / (1.0 + (-v).exp())),
        Activation::Softmax => softmax_rows(pre),
    }
}

/// Row-wise softmax, shifted by the row maximum for stability.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Row-wise log-sum-exp, shifted by the row maximum.
pub fn log_sum_exp_rows(logits: &Array2<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(logits.nrows());
    for (i, row) in logits.rows().into_iter().enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        out[i] = max + sum.ln();
    }
    out
}

/// Runs `input` through the layer stack, returning the final activation
/// and the per-layer caches consumed by [`backward`].
pub fn forward(layers: &[DenseLayer], input: &Array2<f64>) -> Result<(Array2<f64>, Vec<LayerCache>)> {
    let mut x = input.clone();
    let mut caches = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        if x.ncols() != layer.in_dim() {
            return Err(CoreError::Validation(format!(
                "layer {i} expects {} inputs, got {}",
                layer.in_dim(),
                x.ncols()
            )));
        }
        let pre = x.dot(&layer.w) + &layer.b;
        let post = apply_activation(layer.activation, &pre);
        caches.push(LayerCache {
            input: x,
            pre,
            post: post.clone(),
        });
        x = post;
    }
    Ok((x, caches))
}

/// Gradient of the loss w.r.t. a layer's pre-activation, given the
/// gradient w.r.t. its post-activation.
fn activation_backward(
    activation: Activation,
    cache: &LayerCache,
    d_post: &Array2<f64>,
) -> Array2<f64> {
    match activation {
        Activation::Identity => d_post.clone(),
        // Subgradient 0 at exactly 0.
        Activation::Relu => {
            let mut d = d_post.clone();
            d.zip_mut_with(&cache.pre, |g, &p| {
                if p <= 0.0 {
                    *g = 0.0;
                }
            });
            d
        }
        Activation::Sigmoid => {
            let mut d = d_post.clone();
            d.zip_mut_with(&cache.post, |g, &s| *g *= s * (1.0 - s));
            d
        }
        Activation::Softmax => {
            let mut d = Array2::zeros(d_post.raw_dim());
            for (r, (g_row, p_row)) in d_post
                .rows()
                .into_iter()
                .zip(cache.post.rows())
                .enumerate()
            {
                let dot: f64 = g_row.iter().zip(p_row.iter()).map(|(g, p)| g * p).sum();
                for (c, (&g, &p)) in g_row.iter().zip(p_row.iter()).enumerate() {
                    d[[r, c]] = p * (g - dot);
                }
            }
            d
        }
    }
}

fn check_caches(layers: &[DenseLayer], caches: &[LayerCache], rows: usize) -> Result<()> {
    if layers.len() != caches.len() {
        return Err(CoreError::Contract(format!(
            "{} caches for {} layers",
            caches.len(),
            layers.len()
        )));
    }
    for (i, (layer, cache)) in layers.iter().zip(caches).enumerate() {
        let ok = cache.input.nrows() == rows
            && cache.input.ncols() == layer.in_dim()
            && cache.pre.nrows() == rows
            && cache.pre.ncols() == layer.out_dim()
            && cache.post.raw_dim() == cache.pre.raw_dim();
        if !ok {
            return Err(CoreError::Contract(format!(
                "cache {i} does not match layer {i} (stale or mismatched forward cache)"
            )));
        }
    }
    Ok(())
}

fn backward_impl(
    layers: &[DenseLayer],
    caches: &[LayerCache],
    d_out: &Array2<f64>,
    from_logits: bool,
) -> Result<(Array2<f64>, Vec<GradPair>)> {
    if layers.is_empty() {
        return Err(CoreError::Contract("backward over zero layers".into()));
    }
    check_caches(layers, caches, d_out.nrows())?;
    let last = layers.len() - 1;
    if d_out.ncols() != layers[last].out_dim() {
        return Err(CoreError::Contract(format!(
            "output gradient has {} columns, final layer emits {}",
            d_out.ncols(),
            layers[last].out_dim()
        )));
    }
    let mut grads: Vec<Option<GradPair>> = (0..layers.len()).map(|_| None).collect();
    let mut upstream = d_out.clone();
    for i in (0..layers.len()).rev() {
        let layer = &layers[i];
        let cache = &caches[i];
        let d_pre = if i == last && from_logits {
            upstream
        } else {
            activation_backward(layer.activation, cache, &upstream)
        };
        let dw = cache.input.t().dot(&d_pre);
        let db = d_pre.sum_axis(Axis(0));
        upstream = d_pre.dot(&layer.w.t());
        grads[i] = Some(GradPair { dw, db });
    }
    Ok((
        upstream,
        grads.into_iter().map(|g| g.expect("filled above")).collect(),
    ))
}

/// Backpropagates `d_out` (gradient w.r.t. the final post-activation)
/// through the stack, returning the gradient w.r.t. the stack input and
/// the per-layer parameter gradients.
pub fn backward(
    layers: &[DenseLayer],
    caches: &[LayerCache],
    d_out: &Array2<f64>,
) -> Result<(Array2<f64>, Vec<GradPair>)> {
    backward_impl(layers, caches, d_out, false)
}

/// Like [`backward`], but `d_logits` is the gradient w.r.t. the final
/// layer's pre-activation. Losses that differentiate through their own
/// output nonlinearity (cross-entropy over softmax or sigmoid) use this
/// entry point for numerical exactness.
pub fn backward_from_logits(
    layers: &[DenseLayer],
    caches: &[LayerCache],
    d_logits: &Array2<f64>,
) -> Result<(Array2<f64>, Vec<GradPair>)> {
    backward_impl(layers, caches, d_logits, true)
}

/// Momentum SGD over a fixed list of layers, with L2 regularization
/// applied to weight matrices only (biases are never decayed).
///
/// Update per tensor: `v = momentum*v + (grad + l2*param)` for weights,
/// `v = momentum*v + grad` for biases, then `param -= lr*v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    momentum: f64,
    l2_weight: f64,
    velocity: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Sgd {
    pub fn new<'a>(
        momentum: f64,
        l2_weight: f64,
        layers: impl Iterator<Item = &'a DenseLayer>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(CoreError::Argument(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        if !(l2_weight >= 0.0 && l2_weight.is_finite()) {
            return Err(CoreError::Argument(format!(
                "l2 weight must be finite and nonnegative, got {l2_weight}"
            )));
        }
        let velocity = layers
            .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
            .collect();
        Ok(Sgd {
            momentum,
            l2_weight,
            velocity,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.velocity.len()
    }

    /// Applies one update to layer `idx`. The gradient must be finite.
    pub fn step(&mut self, idx: usize, layer: &mut DenseLayer, grad: &GradPair, lr: f64) -> Result<()> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(CoreError::Argument(format!(
                "learning rate must be finite and positive, got {lr}"
            )));
        }
        let (vw, vb) = self.velocity.get_mut(idx).ok_or_else(|| {
            CoreError::Contract(format!("optimizer holds no velocity for layer {idx}"))
        })?;
        if vw.raw_dim() != layer.w.raw_dim() || vb.raw_dim() != layer.b.raw_dim() {
            return Err(CoreError::Contract(format!(
                "velocity shape does not match layer {idx}"
            )));
        }
        if grad.dw.raw_dim() != layer.w.raw_dim() || grad.db.raw_dim() != layer.b.raw_dim() {
            return Err(CoreError::Contract(format!(
                "gradient shape does not match layer {idx}"
            )));
        }
        if !grad.is_finite() {
            return Err(CoreError::Numeric(format!(
                "non-finite gradient for layer {idx}"
            )));
        }
        azip_update(vw, &grad.dw, &layer.w, self.momentum, self.l2_weight);
        layer.w.scaled_add(-lr, vw);
        vb.zip_mut_with(&grad.db, |v, &g| *v = self.momentum * *v + g);
        layer.b.scaled_add(-lr, vb);
        Ok(())
    }
}

fn azip_update(
    v: &mut Array2<f64>,
    grad: &Array2<f64>,
    param: &Array2<f64>,
    momentum: f64,
    l2: f64,
) {
    ndarray::Zip::from(v)
        .and(grad)
        .and(param)
        .for_each(|v, &g, &p| *v = momentum * *v + (g + l2 * p));
}
