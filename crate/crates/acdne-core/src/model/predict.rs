//! Inference: embedding a whole network and classifying its nodes with
//! a trained model.

use ndarray::{s, Array2};

use crate::error::{CoreError, Result};
use crate::graph::{AttributedNetwork, LabelMode};
use crate::nn::{forward, softmax_rows};
use crate::proximity::{neighbor_aggregate, ppmi_matrix};
use crate::sparse::SparseRowMatrix;

use super::train::{TrainedModel, FULL_PASS_CHUNK};
use super::embed_forward;

/// Re-expresses a network's attributes in the model's attribute space.
///
/// When both sides carry names, every input column must name an
/// attribute the model knows (unknown names are an error, not silently
/// dropped) and model attributes missing from the input are zero-filled.
/// Without names on the model, matching is positional and widths must
/// agree exactly.
fn align_to_model(model: &TrainedModel, net: &AttributedNetwork) -> Result<SparseRowMatrix> {
    match (&model.attr_names, net.attr_names()) {
        (Some(model_names), Some(net_names)) => {
            if model_names.as_slice() == net_names {
                return Ok(net.attrs().clone());
            }
            let mut order: Vec<usize> = (0..model_names.len()).collect();
            order.sort_by(|&a, &b| model_names[a].cmp(&model_names[b]));
            let lookup = |name: &str| -> Option<usize> {
                order
                    .binary_search_by(|&i| model_names[i].as_str().cmp(name))
                    .ok()
                    .map(|k| order[k])
            };
            let mut col_map = Vec::with_capacity(net_names.len());
            for name in net_names {
                match lookup(name) {
                    Some(c) => col_map.push(c as u32),
                    None => {
                        return Err(CoreError::Validation(format!(
                            "attribute {name:?} is unknown to the model"
                        )));
                    }
                }
            }
            let mut sorted = col_map.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(CoreError::Validation(
                    "two input attributes map to the same model attribute".into(),
                ));
            }
            let rows = net
                .attrs()
                .iter_rows()
                .map(|row| {
                    let mut mapped: Vec<(u32, f64)> = row
                        .iter()
                        .map(|&(c, v)| (col_map[c as usize], v))
                        .collect();
                    mapped.sort_unstable_by_key(|&(c, _)| c);
                    mapped
                })
                .collect();
            SparseRowMatrix::from_rows(model_names.len(), rows)
        }
        (Some(_), None) => Err(CoreError::Validation(
            "the model names its attributes but the input network carries no names".into(),
        )),
        // A model trained on unnamed attributes matches positionally;
        // names on the input add nothing to match against.
        (None, _) => {
            if net.attr_dim() != model.attr_dim {
                return Err(CoreError::Validation(format!(
                    "network has {} attributes but the model expects {}",
                    net.attr_dim(),
                    model.attr_dim
                )));
            }
            Ok(net.attrs().clone())
        }
    }
}

/// Embeds every node of `net` with the trained model, recomputing the
/// proximity matrix and neighborhood aggregates at the model's horizon.
pub fn embed_network(model: &TrainedModel, net: &AttributedNetwork) -> Result<Array2<f64>> {
    let attrs = align_to_model(model, net)?;
    if attrs.ncols() != model.attr_dim {
        return Err(CoreError::Validation(format!(
            "aligned attributes have {} columns but the model expects {}",
            attrs.ncols(),
            model.attr_dim
        )));
    }
    let prox = ppmi_matrix(net, model.config.k_steps)?;
    let nbr = neighbor_aggregate(&prox, &attrs)?;
    let n = net.node_count();
    let mut out = Array2::zeros((n, model.params.embed_dim()));
    let mut start = 0usize;
    while start < n {
        let end = (start + FULL_PASS_CHUNK).min(n);
        let rows: Vec<usize> = (start..end).collect();
        let (embed, _) = embed_forward(
            &model.params,
            &attrs.gather_dense(&rows),
            &nbr.gather_dense(&rows),
        )?;
        out.slice_mut(s![start..end, ..]).assign(&embed);
        start = end;
    }
    Ok(out)
}

/// Per-node class scores and hard assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    /// One row per node: softmax probabilities for multiclass models,
    /// independent sigmoid probabilities for multilabel models.
    pub probabilities: Array2<f64>,
    /// 0/1 matrix: the argmax class for multiclass models (ties resolve
    /// to the lowest class index), every class with probability at
    /// least 0.5 for multilabel models.
    pub assignments: Array2<f64>,
}

/// Classifies every node of `net`.
pub fn predict(model: &TrainedModel, net: &AttributedNetwork) -> Result<Predictions> {
    let embed = embed_network(model, net)?;
    let (logits, _) = forward(std::slice::from_ref(&model.params.classifier), &embed)?;
    let (probabilities, assignments) = match model.params.label_mode {
        LabelMode::Multiclass => {
            let probs = softmax_rows(&logits);
            let mut hard = Array2::zeros(probs.raw_dim());
            for (r, row) in probs.rows().into_iter().enumerate() {
                let mut best = 0usize;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                hard[[r, best]] = 1.0;
            }
            (probs, hard)
        }
        LabelMode::Multilabel => {
            let probs = logits.mapv(|z| 1.0 / (1.0 + (-z).exp()));
            let hard = probs.mapv(|p| f64::from(u8::from(p >= 0.5)));
            (probs, hard)
        }
    };
    Ok(Predictions {
        probabilities,
        assignments,
    })
}
