//! The cross-network embedding model.
//!
//! Architecture: two feature extractors — one over a node's own
//! attributes, one over its proximity-weighted neighborhood attributes —
//! whose outputs are concatenated and projected into the embedding
//! space; a node classifier trained on labeled source nodes; and a
//! network discriminator trained to tell source embeddings from target
//! embeddings. The embedding parameters receive the classifier and
//! pairwise-constraint gradients plus the discriminator gradient with a
//! negative sign, which pushes the embedding toward features the
//! discriminator cannot separate.

pub mod batch;
pub mod ckpt;
pub mod losses;
pub mod predict;
#[cfg(test)]
pub(crate) mod testutil;
pub mod train;

use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::graph::LabelMode;
use crate::nn::{backward, forward, Activation, DenseLayer, GradPair, LayerCache};

/// Which parts of the model are active. Used for ablation studies; the
/// default is [`ModelVariant::Full`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelVariant {
    /// Everything on.
    Full,
    /// Drop the extractor over a node's own attributes; embed from
    /// neighborhood attributes alone.
    WithoutFe1,
    /// Drop the extractor over neighborhood attributes; embed from the
    /// node's own attributes alone.
    WithoutFe2,
    /// Train without the pairwise proximity constraint on embeddings.
    WithoutPairwise,
    /// Train without the classification loss; the classifier keeps its
    /// initial weights.
    WithoutClassifier,
    /// The discriminator still trains, but its gradient never reaches
    /// the embedding parameters.
    WithoutDiscriminator,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 6] = [
        ModelVariant::Full,
        ModelVariant::WithoutFe1,
        ModelVariant::WithoutFe2,
        ModelVariant::WithoutPairwise,
        ModelVariant::WithoutClassifier,
        ModelVariant::WithoutDiscriminator,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelVariant::Full => "full",
            ModelVariant::WithoutFe1 => "no-fe1",
            ModelVariant::WithoutFe2 => "no-fe2",
            ModelVariant::WithoutPairwise => "no-pairwise",
            ModelVariant::WithoutClassifier => "no-classifier",
            ModelVariant::WithoutDiscriminator => "no-discriminator",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|v| v.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = Self::ALL.iter().map(|v| v.as_str()).collect();
                CoreError::Argument(format!(
                    "unknown model variant {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }

    pub fn uses_fe1(&self) -> bool {
        !matches!(self, ModelVariant::WithoutFe1)
    }

    pub fn uses_fe2(&self) -> bool {
        !matches!(self, ModelVariant::WithoutFe2)
    }
}

/// Training hyperparameters. [`TrainConfig::default`] matches the
/// reference setup this implementation follows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Steps of the random-walk proximity horizon.
    pub k_steps: usize,
    /// Hidden widths of each feature extractor.
    pub fe_hidden: Vec<usize>,
    /// Dimension of the final node embedding.
    pub embed_dim: usize,
    /// Hidden widths of the network discriminator.
    pub disc_hidden: Vec<usize>,
    /// Nodes per training batch, half from each network. Must be even.
    pub batch_size: usize,
    /// Number of passes over the larger network.
    pub epochs: usize,
    /// Initial learning rate; decays as `mu0 / (1 + 10p)^0.75` over
    /// training progress `p` in [0, 1].
    pub mu0: f64,
    /// Peak weight of the discriminator gradient on the embedding; the
    /// effective weight ramps from 0 along `2/(1+exp(-10p)) - 1`.
    pub lambda_max: f64,
    /// Weight of the pairwise proximity constraint.
    pub pair_weight: f64,
    /// SGD momentum.
    pub momentum: f64,
    /// L2 penalty applied to weight matrices (never biases).
    pub l2_weight: f64,
    /// Seed for initialization and batch sampling.
    pub seed: u64,
    pub variant: ModelVariant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_steps: 3,
            fe_hidden: vec![512, 128],
            embed_dim: 128,
            disc_hidden: vec![128, 128],
            batch_size: 100,
            epochs: 100,
            mu0: 0.02,
            lambda_max: 1.0,
            pair_weight: 0.1,
            momentum: 0.9,
            l2_weight: 1e-3,
            seed: 0,
            variant: ModelVariant::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let arg = |msg: String| Err(CoreError::Argument(msg));
        if self.k_steps == 0 {
            return arg("k_steps must be at least 1".into());
        }
        if self.embed_dim == 0 {
            return arg("embed_dim must be at least 1".into());
        }
        if self.fe_hidden.iter().any(|&w| w == 0) || self.disc_hidden.iter().any(|&w| w == 0) {
            return arg("hidden layer widths must be at least 1".into());
        }
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return arg(format!(
                "batch_size must be even and at least 2, got {}",
                self.batch_size
            ));
        }
        if self.epochs == 0 {
            return arg("epochs must be at least 1".into());
        }
        if !(self.mu0.is_finite() && self.mu0 > 0.0) {
            return arg(format!("mu0 must be finite and positive, got {}", self.mu0));
        }
        if !(self.lambda_max.is_finite() && self.lambda_max >= 0.0) {
            return arg(format!(
                "lambda_max must be finite and nonnegative, got {}",
                self.lambda_max
            ));
        }
        if !(self.pair_weight.is_finite() && self.pair_weight >= 0.0) {
            return arg(format!(
                "pair_weight must be finite and nonnegative, got {}",
                self.pair_weight
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return arg(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.l2_weight.is_finite() && self.l2_weight >= 0.0) {
            return arg(format!(
                "l2_weight must be finite and nonnegative, got {}",
                self.l2_weight
            ));
        }
        Ok(())
    }
}

/// All trainable parameters.
///
/// A feature-extractor branch is `None` only when the variant removes
/// it; a present branch with no hidden layers is `Some(vec![])` and
/// feeds raw inputs to the combining layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub variant: ModelVariant,
    pub label_mode: LabelMode,
    pub fe1: Option<Vec<DenseLayer>>,
    pub fe2: Option<Vec<DenseLayer>>,
    /// Combines the branch outputs into the embedding.
    pub concat: DenseLayer,
    /// Emits class logits from the embedding.
    pub classifier: DenseLayer,
    /// Hidden layers plus a final 2-logit layer (source vs. target).
    pub disc: Vec<DenseLayer>,
}

fn relu_chain(in_dim: usize, widths: &[usize], rng: &mut impl Rng) -> Vec<DenseLayer> {
    let mut layers = Vec::with_capacity(widths.len());
    let mut prev = in_dim;
    for &w in widths {
        layers.push(DenseLayer::glorot(prev, w, Activation::Relu, rng));
        prev = w;
    }
    layers
}

impl ModelParams {
    /// Draws fresh parameters. The draw order is fixed — extractor over
    /// own attributes, extractor over neighborhood attributes, combining
    /// layer, classifier, discriminator — so a seed fully determines the
    /// initialization.
    pub fn init(
        config: &TrainConfig,
        attr_dim: usize,
        n_classes: usize,
        label_mode: LabelMode,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        config.validate()?;
        if attr_dim == 0 {
            return Err(CoreError::Validation(
                "cannot build a model over zero attributes".into(),
            ));
        }
        let min_classes = match label_mode {
            LabelMode::Multiclass => 2,
            LabelMode::Multilabel => 1,
        };
        if n_classes < min_classes {
            return Err(CoreError::Validation(format!(
                "{} models need at least {min_classes} classes, got {n_classes}",
                label_mode.as_str()
            )));
        }
        let branch_out = config.fe_hidden.last().copied().unwrap_or(attr_dim);
        let fe1 = config
            .variant
            .uses_fe1()
            .then(|| relu_chain(attr_dim, &config.fe_hidden, rng));
        let fe2 = config
            .variant
            .uses_fe2()
            .then(|| relu_chain(attr_dim, &config.fe_hidden, rng));
        let concat_in = match (&fe1, &fe2) {
            (Some(_), Some(_)) => 2 * branch_out,
            _ => branch_out,
        };
        let concat = DenseLayer::glorot(concat_in, config.embed_dim, Activation::Relu, rng);
        let classifier = DenseLayer::glorot(config.embed_dim, n_classes, Activation::Identity, rng);
        let mut disc = relu_chain(config.embed_dim, &config.disc_hidden, rng);
        let disc_in = config.disc_hidden.last().copied().unwrap_or(config.embed_dim);
        disc.push(DenseLayer::glorot(disc_in, 2, Activation::Identity, rng));
        Ok(ModelParams {
            variant: config.variant,
            label_mode,
            fe1,
            fe2,
            concat,
            classifier,
            disc,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.concat.out_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.classifier.out_dim()
    }

    pub fn attr_dim(&self) -> usize {
        let first_in = |b: &[DenseLayer]| b.first().map(DenseLayer::in_dim);
        match (&self.fe1, &self.fe2) {
            // With no hidden layers the combining layer consumes raw
            // attributes directly — both branches' worth when both exist.
            (Some(a), Some(b)) => first_in(a)
                .or_else(|| first_in(b))
                .unwrap_or_else(|| self.concat.in_dim() / 2),
            (Some(b), None) | (None, Some(b)) => {
                first_in(b).unwrap_or_else(|| self.concat.in_dim())
            }
            (None, None) => unreachable!("at least one branch is always present"),
        }
    }

    /// Layers in the fixed order used by the optimizer and checkpoints.
    pub fn layer_refs(&self) -> Vec<&DenseLayer> {
        let mut out = Vec::new();
        if let Some(b) = &self.fe1 {
            out.extend(b.iter());
        }
        if let Some(b) = &self.fe2 {
            out.extend(b.iter());
        }
        out.push(&self.concat);
        out.push(&self.classifier);
        out.extend(self.disc.iter());
        out
    }
}

/// Intermediate state of [`embed_forward`], consumed by
/// [`embed_backward`].
#[derive(Debug, Clone)]
pub struct EmbedCache {
    fe1: Option<Vec<LayerCache>>,
    fe2: Option<Vec<LayerCache>>,
    concat: Vec<LayerCache>,
    /// Columns the first branch occupies in the combining layer's input.
    split: usize,
}

/// Gradients of the embedding parameters. Branch vectors are empty when
/// the branch is absent or has no hidden layers.
#[derive(Debug, Clone)]
pub struct EmbedGrads {
    pub fe1: Vec<GradPair>,
    pub fe2: Vec<GradPair>,
    pub concat: GradPair,
}

/// Maps own-attribute rows and neighborhood-attribute rows to embedding
/// rows. Both inputs must have one row per node, in the same order.
pub fn embed_forward(
    params: &ModelParams,
    own: &Array2<f64>,
    neighborhood: &Array2<f64>,
) -> Result<(Array2<f64>, EmbedCache)> {
    if own.nrows() != neighborhood.nrows() {
        return Err(CoreError::Validation(format!(
            "own attributes have {} rows, neighborhood attributes {}",
            own.nrows(),
            neighborhood.nrows()
        )));
    }
    let (h1, c1) = match &params.fe1 {
        Some(layers) => {
            let (h, c) = forward(layers, own)?;
            (Some(h), Some(c))
        }
        None => (None, None),
    };
    let (h2, c2) = match &params.fe2 {
        Some(layers) => {
            let (h, c) = forward(layers, neighborhood)?;
            (Some(h), Some(c))
        }
        None => (None, None),
    };
    let split = h1.as_ref().map_or(0, Array2::ncols);
    let joint = match (h1, h2) {
        (Some(a), Some(b)) => concatenate![Axis(1), a, b],
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => unreachable!("at least one branch is always present"),
    };
    let (embed, concat) = forward(std::slice::from_ref(&params.concat), &joint)?;
    Ok((
        embed,
        EmbedCache {
            fe1: c1,
            fe2: c2,
            concat,
            split,
        },
    ))
}

/// Backpropagates a gradient w.r.t. the embedding rows through the
/// combining layer and both extractor branches.
pub fn embed_backward(
    params: &ModelParams,
    cache: &EmbedCache,
    d_embed: &Array2<f64>,
) -> Result<EmbedGrads> {
    let (d_joint, mut concat_grads) =
        backward(std::slice::from_ref(&params.concat), &cache.concat, d_embed)?;
    let concat = concat_grads.pop().expect("single combining layer");
    let back_branch = |layers: &Option<Vec<DenseLayer>>,
                       caches: &Option<Vec<LayerCache>>,
                       d: ndarray::ArrayView2<f64>|
     -> Result<Vec<GradPair>> {
        match (layers, caches) {
            (Some(ls), Some(cs)) if ls.is_empty() => {
                debug_assert!(cs.is_empty());
                Ok(Vec::new())
            }
            (Some(ls), Some(cs)) => {
                let (_, grads) = backward(ls, cs, &d.to_owned())?;
                Ok(grads)
            }
            (None, None) => Ok(Vec::new()),
            _ => Err(CoreError::Contract(
                "embedding cache does not match the model's branches".into(),
            )),
        }
    };
    let fe1 = back_branch(&params.fe1, &cache.fe1, d_joint.slice(s![.., ..cache.split]))?;
    let fe2 = back_branch(&params.fe2, &cache.fe2, d_joint.slice(s![.., cache.split..]))?;
    Ok(EmbedGrads { fe1, fe2, concat })
}

/// Gradients for every trainable tensor, shaped like [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub embed: EmbedGrads,
    pub classifier: GradPair,
    pub disc: Vec<GradPair>,
}
