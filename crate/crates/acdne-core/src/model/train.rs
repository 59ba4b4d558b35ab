//! The training loop.
//!
//! One batch stacks `batch_size/2` source rows on top of `batch_size/2`
//! target rows, embeds them once, and pulls three gradients back into
//! the shared embedding parameters: the classification loss over the
//! labeled source rows, the pairwise proximity loss within each half,
//! and the discriminator loss with a negative weight `lambda` so the
//! embedding moves against the discriminator while the discriminator
//! itself always trains on its plain gradient.
//!
//! Training is strictly sequential and seeded: a config plus a prepared
//! pair determines every parameter bit of the result.

use ndarray::{concatenate, s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::graph::{LabelMode, Labels, NetworkPair};
use crate::nn::{backward, forward, GradPair, Sgd};
use crate::proximity::{neighbor_aggregate, ppmi_matrix, NeighborFeatures, ProximityMatrix};
use crate::sparse::SparseRowMatrix;

use super::batch::{batches_per_epoch, MiniBatch, MiniBatchSampler};
use super::losses::{
    classification_loss, domain_loss, pairwise_loss, schedule_lambda, schedule_lr,
};
use super::{embed_backward, embed_forward, ModelGrads, ModelParams, ModelVariant, TrainConfig};

/// Everything derived from a [`NetworkPair`] that training needs:
/// proximity matrices, neighborhood attribute aggregates, and the label
/// matrix. Preparing once and training many times is the cheap way to
/// run seed sweeps and ablations over one dataset.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub source_attrs: SparseRowMatrix,
    pub target_attrs: SparseRowMatrix,
    pub source_nbr: NeighborFeatures,
    pub target_nbr: NeighborFeatures,
    pub source_prox: ProximityMatrix,
    pub target_prox: ProximityMatrix,
    pub source_labels: Labels,
    pub label_mode: LabelMode,
    pub attr_names: Option<Vec<String>>,
    pub attr_dim: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub classes: usize,
}

impl PreparedPair {
    pub fn prepare(pair: &NetworkPair, k_steps: usize) -> Result<Self> {
        let labels = pair
            .source
            .labels()
            .ok_or_else(|| CoreError::Validation("source network must carry labels".into()))?
            .clone();
        if labels.labeled_count() == 0 {
            return Err(CoreError::Validation(
                "source network has no labeled nodes to learn from".into(),
            ));
        }
        let source_prox = ppmi_matrix(&pair.source, k_steps)?;
        let target_prox = ppmi_matrix(&pair.target, k_steps)?;
        let source_nbr = neighbor_aggregate(&source_prox, pair.source.attrs())?;
        let target_nbr = neighbor_aggregate(&target_prox, pair.target.attrs())?;
        Ok(PreparedPair {
            source_attrs: pair.source.attrs().clone(),
            target_attrs: pair.target.attrs().clone(),
            source_nbr,
            target_nbr,
            source_prox,
            target_prox,
            label_mode: pair.source.label_mode(),
            attr_names: pair.source.attr_names().map(<[String]>::to_vec),
            attr_dim: pair.attribute_dim(),
            n_source: pair.source.node_count(),
            n_target: pair.target.node_count(),
            classes: pair.classes(),
            source_labels: labels,
        })
    }
}

/// Losses observed on one batch, before the parameter update.
#[derive(Debug, Clone, Copy)]
pub struct BatchLosses {
    pub class_loss: f64,
    pub pair_loss: f64,
    pub domain_loss: f64,
    /// Discriminator accuracy on this batch.
    pub domain_accuracy: f64,
    /// Labeled source rows the classification loss covered.
    pub labeled_rows: usize,
}

/// One gradient evaluation of the full model on one batch.
///
/// `lambda` scales the discriminator gradient's (negated) contribution
/// to the embedding parameters and `pair_weight` the proximity loss's;
/// the discriminator's own parameters always receive their unscaled
/// gradient, and the classifier's parameters receive exactly the
/// classification gradient. All three loss values are reported even
/// when a weight of zero keeps them out of the update.
pub fn compute_gradients(
    params: &ModelParams,
    prep: &PreparedPair,
    batch: &MiniBatch,
    lambda: f64,
    pair_weight: f64,
) -> Result<(ModelGrads, BatchLosses)> {
    let hs = batch.source.len();
    let ht = batch.target.len();
    if hs == 0 || ht == 0 {
        return Err(CoreError::Validation("batch halves must be non-empty".into()));
    }
    if let Some(&bad) = batch.source.iter().find(|&&i| i >= prep.n_source) {
        return Err(CoreError::Validation(format!(
            "source node {bad} out of range (n = {})",
            prep.n_source
        )));
    }
    if let Some(&bad) = batch.target.iter().find(|&&i| i >= prep.n_target) {
        return Err(CoreError::Validation(format!(
            "target node {bad} out of range (n = {})",
            prep.n_target
        )));
    }
    let own = concatenate![
        Axis(0),
        prep.source_attrs.gather_dense(&batch.source),
        prep.target_attrs.gather_dense(&batch.target)
    ];
    let nbr = concatenate![
        Axis(0),
        prep.source_nbr.gather_dense(&batch.source),
        prep.target_nbr.gather_dense(&batch.target)
    ];
    let (embed, cache) = embed_forward(params, &own, &nbr)?;
    let mut d_embed: Array2<f64> = Array2::zeros(embed.raw_dim());

    // Classification over the labeled source rows. The loss is always
    // reported; the gradient flows only when the variant trains it.
    let labeled_positions: Vec<usize> = (0..hs)
        .filter(|&p| prep.source_labels.is_labeled(batch.source[p]))
        .collect();
    let labeled_rows = labeled_positions.len();
    let mut class_loss = 0.0;
    let mut classifier_grad = GradPair::zeros_like(&params.classifier);
    if labeled_rows > 0 {
        let e_lab = embed.select(Axis(0), &labeled_positions);
        let labeled_nodes: Vec<usize> = labeled_positions
            .iter()
            .map(|&p| batch.source[p])
            .collect();
        let y = prep.source_labels.matrix().select(Axis(0), &labeled_nodes);
        let (logits, ccache) = forward(std::slice::from_ref(&params.classifier), &e_lab)?;
        let cl = classification_loss(&logits, &y.view(), params.label_mode)?;
        class_loss = cl.loss;
        if params.variant != ModelVariant::WithoutClassifier {
            let (d_e_lab, mut cg) = backward(
                std::slice::from_ref(&params.classifier),
                &ccache,
                &cl.d_logits,
            )?;
            classifier_grad = cg.pop().expect("single classifier layer");
            for (k, &pos) in labeled_positions.iter().enumerate() {
                d_embed.row_mut(pos).scaled_add(1.0, &d_e_lab.row(k));
            }
        }
    }

    // Pairwise proximity within each half.
    let pl_src = pairwise_loss(&embed.slice(s![..hs, ..]), &batch.source, &prep.source_prox)?;
    let pl_tgt = pairwise_loss(&embed.slice(s![hs.., ..]), &batch.target, &prep.target_prox)?;
    let pair_total = pl_src.loss + pl_tgt.loss;
    if pair_weight != 0.0 {
        d_embed
            .slice_mut(s![..hs, ..])
            .scaled_add(pair_weight, &pl_src.d_embed);
        d_embed
            .slice_mut(s![hs.., ..])
            .scaled_add(pair_weight, &pl_tgt.d_embed);
    }

    // Discrimination over all rows. The discriminator trains on its own
    // gradient unconditionally; `lambda` only controls how hard its
    // gradient pushes back on the embedding.
    let is_target: Vec<bool> = (0..hs + ht).map(|i| i >= hs).collect();
    let (d_logits, dcache) = forward(&params.disc, &embed)?;
    let dl = domain_loss(&d_logits, &is_target)?;
    let (d_e_domain, disc_grads) = backward(&params.disc, &dcache, &dl.d_logits)?;
    if lambda != 0.0 {
        d_embed.scaled_add(-lambda, &d_e_domain);
    }

    let embed_grads = embed_backward(params, &cache, &d_embed)?;
    Ok((
        ModelGrads {
            embed: embed_grads,
            classifier: classifier_grad,
            disc: disc_grads,
        },
        BatchLosses {
            class_loss,
            pair_loss: pair_total,
            domain_loss: dl.loss,
            domain_accuracy: dl.accuracy,
            labeled_rows,
        },
    ))
}

/// Applies one SGD step to every trainable layer in the fixed optimizer
/// order. `update_classifier` is false when the batch produced no
/// classification gradient (nothing labeled, or the variant skips the
/// loss); the classifier then keeps its exact parameters instead of
/// drifting under weight decay.
fn apply_updates(
    params: &mut ModelParams,
    sgd: &mut Sgd,
    grads: &ModelGrads,
    lr: f64,
    update_classifier: bool,
) -> Result<()> {
    let mut idx = 0usize;
    if let Some(branch) = params.fe1.as_mut() {
        if branch.len() != grads.embed.fe1.len() {
            return Err(CoreError::Contract(
                "gradient does not cover the first extractor branch".into(),
            ));
        }
        for (layer, g) in branch.iter_mut().zip(&grads.embed.fe1) {
            sgd.step(idx, layer, g, lr)?;
            idx += 1;
        }
    }
    if let Some(branch) = params.fe2.as_mut() {
        if branch.len() != grads.embed.fe2.len() {
            return Err(CoreError::Contract(
                "gradient does not cover the second extractor branch".into(),
            ));
        }
        for (layer, g) in branch.iter_mut().zip(&grads.embed.fe2) {
            sgd.step(idx, layer, g, lr)?;
            idx += 1;
        }
    }
    sgd.step(idx, &mut params.concat, &grads.embed.concat, lr)?;
    idx += 1;
    if update_classifier {
        sgd.step(idx, &mut params.classifier, &grads.classifier, lr)?;
    }
    idx += 1;
    if params.disc.len() != grads.disc.len() {
        return Err(CoreError::Contract(
            "gradient does not cover the discriminator".into(),
        ));
    }
    for (layer, g) in params.disc.iter_mut().zip(&grads.disc) {
        sgd.step(idx, layer, g, lr)?;
        idx += 1;
    }
    Ok(())
}

/// Per-epoch training record. Loss figures are means over the epoch's
/// batches, measured before each update; `lr` and `lambda` are the
/// values in force at the epoch's first batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub class_loss: f64,
    pub pair_loss: f64,
    pub domain_loss: f64,
    pub lr: f64,
    pub lambda: f64,
    /// Mean pre-update discriminator accuracy over the epoch's batches.
    pub domain_batch_accuracy: f64,
    /// Discriminator accuracy over every node of both networks, with
    /// the parameters as of the end of the epoch.
    pub domain_full_accuracy: f64,
}

/// Why training stopped early.
#[derive(Debug, Clone)]
pub struct DivergenceEvent {
    /// 1-based epoch in which the blow-up happened.
    pub epoch: usize,
    /// 0-based batch within that epoch.
    pub batch: usize,
    pub detail: String,
}

/// A trained model plus what inference needs to reproduce its input
/// space.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub config: TrainConfig,
    /// Attribute names of the space the model was trained on, when the
    /// training data carried names. Used to re-align attributes at
    /// prediction time.
    pub attr_names: Option<Vec<String>>,
    pub attr_dim: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: TrainedModel,
    pub history: Vec<EpochStats>,
    /// `Some` when training blew up; the returned parameters are then
    /// the snapshot from the start of the epoch named in the event.
    pub divergence: Option<DivergenceEvent>,
}

/// Discriminator accuracy over every node of both networks under the
/// given parameters.
pub fn full_domain_accuracy(params: &ModelParams, prep: &PreparedPair) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    let sides: [(&SparseRowMatrix, &NeighborFeatures, bool); 2] = [
        (&prep.source_attrs, &prep.source_nbr, false),
        (&prep.target_attrs, &prep.target_nbr, true),
    ];
    for (attrs, nbr, is_target) in sides {
        let n = attrs.nrows();
        let mut start = 0usize;
        while start < n {
            let end = (start + FULL_PASS_CHUNK).min(n);
            let rows: Vec<usize> = (start..end).collect();
            let (embed, _) =
                embed_forward(params, &attrs.gather_dense(&rows), &nbr.gather_dense(&rows))?;
            let (logits, _) = forward(&params.disc, &embed)?;
            for row in logits.rows() {
                let says_target = row[1] > row[0];
                hits += usize::from(says_target == is_target);
            }
            total += rows.len();
            start = end;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Rows per forward pass in full-network sweeps.
pub const FULL_PASS_CHUNK: usize = 512;

/// Trains on an aligned pair. See [`train_prepared`].
pub fn train(pair: &NetworkPair, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let prep = PreparedPair::prepare(pair, config.k_steps)?;
    train_prepared(&prep, config)
}

/// Trains on an already-prepared pair. `prep` must have been built with
/// the same proximity horizon as `config.k_steps`.
///
/// The run is deterministic: the seed fixes initialization and batch
/// order, and every reduction happens in a fixed sequential order. If a
/// loss or gradient stops being finite, training halts and returns the
/// parameters from the start of the offending epoch together with a
/// [`DivergenceEvent`] instead of an error.
pub fn train_prepared(prep: &PreparedPair, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if prep.source_prox.k_steps() != config.k_steps {
        return Err(CoreError::Contract(format!(
            "pair was prepared with a {}-step horizon but the config says {}",
            prep.source_prox.k_steps(),
            config.k_steps
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(
        config,
        prep.attr_dim,
        prep.classes,
        prep.label_mode,
        &mut rng,
    )?;
    let mut sgd = Sgd::new(
        config.momentum,
        config.l2_weight,
        params.layer_refs().into_iter(),
    )?;
    let mut sampler =
        MiniBatchSampler::new(prep.n_source, prep.n_target, config.batch_size, &mut rng)?;
    let per_epoch = batches_per_epoch(prep.n_source, prep.n_target, config.batch_size);
    let total_batches = (config.epochs * per_epoch) as f64;
    let mut history: Vec<EpochStats> = Vec::with_capacity(config.epochs);
    let mut completed = 0usize;

    let finish = |params: ModelParams,
                  history: Vec<EpochStats>,
                  divergence: Option<DivergenceEvent>| TrainOutput {
        model: TrainedModel {
            params,
            config: config.clone(),
            attr_names: prep.attr_names.clone(),
            attr_dim: prep.attr_dim,
            n_classes: prep.classes,
        },
        history,
        divergence,
    };

    for epoch in 1..=config.epochs {
        let snapshot = params.clone();
        let mut sum_class = 0.0;
        let mut sum_pair = 0.0;
        let mut sum_domain = 0.0;
        let mut sum_acc = 0.0;
        let mut epoch_lr = 0.0;
        let mut epoch_lambda = 0.0;
        for b in 0..per_epoch {
            let progress = completed as f64 / total_batches;
            let lambda = if config.variant == ModelVariant::WithoutDiscriminator {
                0.0
            } else {
                schedule_lambda(progress, config.lambda_max)
            };
            let pair_weight = if config.variant == ModelVariant::WithoutPairwise {
                0.0
            } else {
                config.pair_weight
            };
            let lr = schedule_lr(progress, config.mu0);
            if b == 0 {
                epoch_lr = lr;
                epoch_lambda = lambda;
            }
            let batch = sampler.next_batch(&mut rng);
            let (grads, losses) = compute_gradients(&params, prep, &batch, lambda, pair_weight)?;
            let finite = losses.class_loss.is_finite()
                && losses.pair_loss.is_finite()
                && losses.domain_loss.is_finite();
            if !finite {
                return Ok(finish(
                    snapshot,
                    history,
                    Some(DivergenceEvent {
                        epoch,
                        batch: b,
                        detail: format!(
                            "non-finite loss (classification {}, pairwise {}, discrimination {})",
                            losses.class_loss, losses.pair_loss, losses.domain_loss
                        ),
                    }),
                ));
            }
            let update_classifier =
                params.variant != ModelVariant::WithoutClassifier && losses.labeled_rows > 0;
            match apply_updates(&mut params, &mut sgd, &grads, lr, update_classifier) {
                Ok(()) => {}
                Err(CoreError::Numeric(detail)) => {
                    return Ok(finish(
                        snapshot,
                        history,
                        Some(DivergenceEvent {
                            epoch,
                            batch: b,
                            detail,
                        }),
                    ));
                }
                Err(other) => return Err(other),
            }
            sum_class += losses.class_loss;
            sum_pair += losses.pair_loss;
            sum_domain += losses.domain_loss;
            sum_acc += losses.domain_accuracy;
            completed += 1;
        }
        let denom = per_epoch as f64;
        let domain_full_accuracy = full_domain_accuracy(&params, prep)?;
        history.push(EpochStats {
            epoch,
            class_loss: sum_class / denom,
            pair_loss: sum_pair / denom,
            domain_loss: sum_domain / denom,
            lr: epoch_lr,
            lambda: epoch_lambda,
            domain_batch_accuracy: sum_acc / denom,
            domain_full_accuracy,
        });
    }
    Ok(finish(params, history, None))
}
