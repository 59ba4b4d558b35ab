//! Training losses and schedules.
//!
//! Every loss returns both its value and the gradient with respect to
//! its immediate input (logits or embeddings), so callers compose them
//! with backpropagation without re-deriving anything.

use ndarray::{Array2, ArrayView2};

use crate::error::{CoreError, Result};
use crate::graph::LabelMode;
use crate::nn::{log_sum_exp_rows, softmax_rows};
use crate::proximity::ProximityMatrix;

/// Floor applied to probabilities before taking logarithms.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ClassificationLoss {
    pub loss: f64,
    /// Gradient w.r.t. the class logits, already divided by the row count.
    pub d_logits: Array2<f64>,
}

/// Label-prediction loss over logit rows.
///
/// Multiclass: mean softmax cross-entropy against one-hot targets.
/// Multilabel: mean over rows of the summed per-class sigmoid
/// cross-entropies. Both are computed from logits in their
/// numerically stable forms.
pub fn classification_loss(
    logits: &Array2<f64>,
    targets: &ArrayView2<f64>,
    mode: LabelMode,
) -> Result<ClassificationLoss> {
    if logits.raw_dim() != targets.raw_dim() {
        return Err(CoreError::Validation(format!(
            "logits are {:?} but targets are {:?}",
            logits.dim(),
            targets.dim()
        )));
    }
    let m = logits.nrows();
    if m == 0 {
        return Ok(ClassificationLoss {
            loss: 0.0,
            d_logits: Array2::zeros(logits.raw_dim()),
        });
    }
    let mf = m as f64;
    match mode {
        LabelMode::Multiclass => {
            let lse = log_sum_exp_rows(logits);
            let mut loss = 0.0;
            for (i, (z_row, y_row)) in logits.rows().into_iter().zip(targets.rows()).enumerate() {
                let picked: f64 = z_row.iter().zip(y_row.iter()).map(|(z, y)| z * y).sum();
                loss += lse[i] - picked;
            }
            let mut d_logits = softmax_rows(logits);
            d_logits -= targets;
            d_logits.mapv_inplace(|v| v / mf);
            Ok(ClassificationLoss {
                loss: loss / mf,
                d_logits,
            })
        }
        LabelMode::Multilabel => {
            let mut loss = 0.0;
            let mut d_logits = Array2::zeros(logits.raw_dim());
            for ((z, y), d) in logits.iter().zip(targets.iter()).zip(d_logits.iter_mut()) {
                // max(z,0) - z*y + ln(1 + exp(-|z|)) is the stable form of
                // -[y ln s(z) + (1-y) ln(1-s(z))].
                loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
                let s = 1.0 / (1.0 + (-z).exp());
                *d = (s - y) / mf;
            }
            Ok(ClassificationLoss {
                loss: loss / mf,
                d_logits,
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct DomainLoss {
    pub loss: f64,
    /// Gradient w.r.t. the two-column domain logits, divided by the row
    /// count.
    pub d_logits: Array2<f64>,
    /// Fraction of rows whose argmax matches the true network.
    pub accuracy: f64,
}

/// Two-way softmax cross-entropy for the network discriminator.
/// `is_target[i]` says which network row `i` came from (column 0 is the
/// source network, column 1 the target).
pub fn domain_loss(logits: &Array2<f64>, is_target: &[bool]) -> Result<DomainLoss> {
    if logits.ncols() != 2 {
        return Err(CoreError::Validation(format!(
            "discriminator emits 2 logits, got {}",
            logits.ncols()
        )));
    }
    if logits.nrows() != is_target.len() || is_target.is_empty() {
        return Err(CoreError::Validation(format!(
            "{} logit rows for {} network tags",
            logits.nrows(),
            is_target.len()
        )));
    }
    let m = logits.nrows() as f64;
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    let mut hits = 0usize;
    let mut d_logits = probs.clone();
    for (i, &tgt) in is_target.iter().enumerate() {
        let truth = usize::from(tgt);
        loss -= probs[[i, truth]].max(PROB_FLOOR).ln();
        // Ties resolve to the source column, deterministically.
        let pred = usize::from(probs[[i, 1]] > probs[[i, 0]]);
        hits += usize::from(pred == truth);
        d_logits[[i, truth]] -= 1.0;
    }
    d_logits.mapv_inplace(|v| v / m);
    Ok(DomainLoss {
        loss: loss / m,
        d_logits,
        accuracy: hits as f64 / m,
    })
}

#[derive(Debug, Clone)]
pub struct PairwiseLoss {
    pub loss: f64,
    /// Gradient w.r.t. the embedding rows, divided by the row count.
    pub d_embed: Array2<f64>,
}

/// Proximity-weighted embedding smoothness over one network's half of a
/// batch: `(1/m) * sum over ordered pairs (p, q) of a[node_p, node_q] *
/// ||e_p - e_q||^2`, where `m` is the number of rows and `a` the stored
/// proximity. Rows map to nodes through `nodes`; repeated nodes are
/// allowed and each occurrence counts separately.
pub fn pairwise_loss(
    embed: &ArrayView2<f64>,
    nodes: &[usize],
    prox: &ProximityMatrix,
) -> Result<PairwiseLoss> {
    if embed.nrows() != nodes.len() {
        return Err(CoreError::Validation(format!(
            "{} embedding rows for {} nodes",
            embed.nrows(),
            nodes.len()
        )));
    }
    if let Some(&bad) = nodes.iter().find(|&&n| n >= prox.node_count()) {
        return Err(CoreError::Validation(format!(
            "node {bad} is out of range for a proximity matrix over {} nodes",
            prox.node_count()
        )));
    }
    let m = nodes.len();
    let mut loss = 0.0;
    let mut d_embed = Array2::zeros(embed.raw_dim());
    if m == 0 {
        return Ok(PairwiseLoss { loss, d_embed });
    }
    let mf = m as f64;
    // Rows sorted by node id let each proximity row be walked once with a
    // two-pointer merge instead of a lookup per pair.
    let mut by_node: Vec<(u32, usize)> = nodes.iter().map(|&n| n as u32).zip(0..m).collect();
    by_node.sort_unstable();
    for p in 0..m {
        let row = prox.row(nodes[p]);
        let e_p = embed.row(p);
        let mut cursor = 0usize;
        for &(col, a) in row {
            while cursor < by_node.len() && by_node[cursor].0 < col {
                cursor += 1;
            }
            let mut at = cursor;
            while at < by_node.len() && by_node[at].0 == col {
                let q = by_node[at].1;
                at += 1;
                if q == p {
                    continue;
                }
                let e_q = embed.row(q);
                let w = a / mf;
                let mut dist2 = 0.0;
                for (&vp, &vq) in e_p.iter().zip(e_q.iter()) {
                    let diff = vp - vq;
                    dist2 += diff * diff;
                }
                loss += w * dist2;
                for (k, (&vp, &vq)) in e_p.iter().zip(e_q.iter()).enumerate() {
                    let g = 2.0 * w * (vp - vq);
                    d_embed[[p, k]] += g;
                    d_embed[[q, k]] -= g;
                }
            }
        }
    }
    Ok(PairwiseLoss { loss, d_embed })
}

/// Ramp for the discriminator's weight on the embedding gradient:
/// `lambda_max * (2 / (1 + exp(-10 p)) - 1)` for progress `p` in [0, 1].
/// Starts at 0 and saturates at `lambda_max`.
pub fn schedule_lambda(progress: f64, lambda_max: f64) -> f64 {
    lambda_max * (2.0 / (1.0 + (-10.0 * progress).exp()) - 1.0)
}

/// Learning-rate decay: `mu0 / (1 + 10 p)^0.75` for progress `p` in
/// [0, 1].
pub fn schedule_lr(progress: f64, mu0: f64) -> f64 {
    mu0 / (1.0 + 10.0 * progress).powf(0.75)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AttributedNetwork, LabelMode};
    use crate::proximity::ppmi_matrix;
    use crate::sparse::SparseRowMatrix;
    use ndarray::array;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn multiclass_loss_matches_direct_formula() {
        let logits = array![[2.0, 0.0, -1.0], [0.5, 0.5, 0.5]];
        let targets = array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let out =
            classification_loss(&logits, &targets.view(), LabelMode::Multiclass).unwrap();
        // Row 0: -ln(e^2 / (e^2 + 1 + e^-1)); row 1: -ln(1/3).
        let p0 = (2.0f64).exp() / ((2.0f64).exp() + 1.0 + (-1.0f64).exp());
        let expected = (-p0.ln() + (3.0f64).ln()) / 2.0;
        assert!(close(out.loss, expected, 1e-12));
        // Gradient rows sum to zero for softmax cross-entropy.
        for row in out.d_logits.rows() {
            assert!(close(row.sum(), 0.0, 1e-15));
        }
    }

    #[test]
    fn multiclass_perfect_confidence_has_near_zero_loss() {
        let logits = array![[50.0, 0.0], [0.0, 50.0]];
        let targets = array![[1.0, 0.0], [0.0, 1.0]];
        let out =
            classification_loss(&logits, &targets.view(), LabelMode::Multiclass).unwrap();
        assert!(out.loss < 1e-20);
    }

    #[test]
    fn multilabel_loss_matches_naive_formula_away_from_extremes() {
        let logits = array![[0.5, -1.5]];
        let targets = array![[1.0, 0.0]];
        let out =
            classification_loss(&logits, &targets.view(), LabelMode::Multilabel).unwrap();
        let s = |z: f64| 1.0 / (1.0 + (-z).exp());
        let naive = -(s(0.5).ln()) - (1.0 - s(-1.5)).ln();
        assert!(close(out.loss, naive, 1e-12));
        assert!(close(out.d_logits[[0, 0]], s(0.5) - 1.0, 1e-12));
        assert!(close(out.d_logits[[0, 1]], s(-1.5), 1e-12));
    }

    #[test]
    fn multilabel_loss_is_stable_for_extreme_logits() {
        let logits = array![[1000.0, -1000.0]];
        let targets = array![[0.0, 1.0]];
        let out =
            classification_loss(&logits, &targets.view(), LabelMode::Multilabel).unwrap();
        assert!(out.loss.is_finite());
        assert!(close(out.loss, 2000.0, 1e-9));
    }

    #[test]
    fn empty_logits_yield_zero_loss() {
        let logits = Array2::zeros((0, 3));
        let targets = Array2::zeros((0, 3));
        let out =
            classification_loss(&logits, &targets.view(), LabelMode::Multiclass).unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn domain_loss_on_uninformative_logits_is_ln_two() {
        let logits = Array2::zeros((4, 2));
        let out = domain_loss(&logits, &[false, false, true, true]).unwrap();
        assert!(close(out.loss, (2.0f64).ln(), 1e-12));
        // All-zero logits tie; ties predict the source network.
        assert!(close(out.accuracy, 0.5, 1e-15));
    }

    #[test]
    fn domain_loss_gradient_is_probability_minus_onehot() {
        let logits = array![[1.0, -1.0], [0.25, 0.75]];
        let out = domain_loss(&logits, &[false, true]).unwrap();
        let p = softmax_rows(&logits);
        assert!(close(out.d_logits[[0, 0]], (p[[0, 0]] - 1.0) / 2.0, 1e-15));
        assert!(close(out.d_logits[[0, 1]], p[[0, 1]] / 2.0, 1e-15));
        assert!(close(out.d_logits[[1, 1]], (p[[1, 1]] - 1.0) / 2.0, 1e-15));
        assert!(close(out.accuracy, 1.0, 1e-15));
    }

    #[test]
    fn domain_loss_accuracy_counts_misses() {
        let logits = array![[0.0, 5.0], [0.0, 5.0], [5.0, 0.0], [0.0, 5.0]];
        let out = domain_loss(&logits, &[true, true, true, false]).unwrap();
        assert!(close(out.accuracy, 0.5, 1e-15));
    }

    fn path_network(n: usize) -> AttributedNetwork {
        let edges: Vec<(u32, u32)> = (0..n as u32 - 1).map(|i| (i, i + 1)).collect();
        AttributedNetwork::new(
            edges,
            SparseRowMatrix::zeros(n, 1),
            None,
            None,
            LabelMode::Multiclass,
        )
        .unwrap()
    }

    #[test]
    fn identical_embeddings_have_zero_pairwise_loss() {
        let net = path_network(3);
        let prox = ppmi_matrix(&net, 1).unwrap();
        let embed = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let out = pairwise_loss(&embed.view(), &[0, 1, 2], &prox).unwrap();
        assert_eq!(out.loss, 0.0);
        assert!(out.d_embed.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn pairwise_loss_matches_hand_computation_on_an_edge() {
        // Two-node path: stored proximity is ln 2 in both directions.
        let net = path_network(2);
        let prox = ppmi_matrix(&net, 1).unwrap();
        let embed = array![[0.0, 0.0], [3.0, 4.0]];
        let out = pairwise_loss(&embed.view(), &[0, 1], &prox).unwrap();
        // Ordered pairs (0,1) and (1,0), each ln2 * 25, divided by m=2.
        let expected = 2.0 * (2.0f64).ln() * 25.0 / 2.0;
        assert!(close(out.loss, expected, 1e-12));
        // d/de_0 = 2*(ln2/2)*(e0-e1) from (0,1) plus 2*(ln2/2)*(e0-e1)
        // from (1,0).
        let g = 2.0 * (2.0f64).ln() * -3.0;
        assert!(close(out.d_embed[[0, 0]], g, 1e-12));
        assert!(close(out.d_embed[[1, 0]], -g, 1e-12));
    }

    #[test]
    fn pairwise_loss_gradient_matches_finite_differences() {
        let net = path_network(4);
        let prox = ppmi_matrix(&net, 2).unwrap();
        let mut embed = array![[0.3, -0.2], [1.0, 0.4], [-0.5, 0.8], [0.2, 0.2]];
        let nodes = [2usize, 0, 3, 1];
        let base = pairwise_loss(&embed.view(), &nodes, &prox).unwrap();
        let h = 1e-6;
        for r in 0..4 {
            for c in 0..2 {
                let orig = embed[[r, c]];
                embed[[r, c]] = orig + h;
                let hi = pairwise_loss(&embed.view(), &nodes, &prox).unwrap().loss;
                embed[[r, c]] = orig - h;
                let lo = pairwise_loss(&embed.view(), &nodes, &prox).unwrap().loss;
                embed[[r, c]] = orig;
                let numeric = (hi - lo) / (2.0 * h);
                assert!(
                    close(numeric, base.d_embed[[r, c]], 1e-6),
                    "({r},{c}): numeric {numeric} vs analytic {}",
                    base.d_embed[[r, c]]
                );
            }
        }
    }

    #[test]
    fn pairwise_loss_handles_repeated_nodes() {
        let net = path_network(2);
        let prox = ppmi_matrix(&net, 1).unwrap();
        let embed = array![[0.0], [1.0], [0.0]];
        // Node 0 appears twice; each occurrence pairs with node 1.
        let out = pairwise_loss(&embed.view(), &[0, 1, 0], &prox).unwrap();
        let expected = 4.0 * (2.0f64).ln() / 3.0;
        assert!(close(out.loss, expected, 1e-12));
    }

    #[test]
    fn unrelated_nodes_contribute_nothing() {
        // Two disjoint edges: 0-1 and 2-3.
        let net = AttributedNetwork::new(
            vec![(0, 1), (2, 3)],
            SparseRowMatrix::zeros(4, 1),
            None,
            None,
            LabelMode::Multiclass,
        )
        .unwrap();
        let prox = ppmi_matrix(&net, 1).unwrap();
        let embed = array![[0.0], [5.0]];
        let out = pairwise_loss(&embed.view(), &[0, 2], &prox).unwrap();
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn lambda_schedule_hits_its_closed_forms() {
        assert!(close(schedule_lambda(0.0, 1.0), 0.0, 1e-15));
        let mid = 2.0 / (1.0 + (-5.0f64).exp()) - 1.0;
        assert!(close(schedule_lambda(0.5, 1.0), mid, 1e-15));
        assert!(close(schedule_lambda(0.5, 0.25), 0.25 * mid, 1e-15));
        assert!(schedule_lambda(1.0, 1.0) > 0.9999);
    }

    #[test]
    fn lr_schedule_hits_its_closed_forms() {
        assert!(close(schedule_lr(0.0, 0.02), 0.02, 1e-15));
        assert!(close(schedule_lr(1.0, 0.02), 0.02 / 11.0f64.powf(0.75), 1e-15));
        assert!(close(schedule_lr(0.3, 0.01), 0.01 / 4.0f64.powf(0.75), 1e-15));
    }
}
