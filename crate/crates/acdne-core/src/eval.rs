//! Classification quality measures: per-class counts and micro- and
//! macro-averaged F1.

use ndarray::Array2;

use crate::error::{CoreError, Result};
use crate::graph::{AttributedNetwork, LabelMode};
use crate::model::predict::predict;
use crate::model::train::TrainedModel;

/// Raw per-class counts plus the class F1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub f1: f64,
}

/// Evaluation over one set of hard assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// F1 of the pooled counts across classes.
    pub micro_f1: f64,
    /// Unweighted mean of per-class F1 scores; classes that never occur
    /// in either prediction or truth contribute an F1 of 0.
    pub macro_f1: f64,
    pub per_class: Vec<ClassCounts>,
    /// Rows that entered the counts.
    pub nodes: usize,
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

fn check_binary(name: &str, m: &Array2<f64>) -> Result<()> {
    if m.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(CoreError::Validation(format!(
            "{name} matrix must contain only 0 and 1"
        )));
    }
    Ok(())
}

/// Computes per-class and aggregate F1 between 0/1 assignment matrices.
/// `mask`, when given, restricts the counts to rows flagged true.
pub fn f1_scores(
    predicted: &Array2<f64>,
    truth: &Array2<f64>,
    mask: Option<&[bool]>,
) -> Result<EvalReport> {
    if predicted.raw_dim() != truth.raw_dim() {
        return Err(CoreError::Validation(format!(
            "predictions are {:?} but truth is {:?}",
            predicted.dim(),
            truth.dim()
        )));
    }
    if let Some(mask) = mask {
        if mask.len() != predicted.nrows() {
            return Err(CoreError::Validation(format!(
                "mask covers {} rows but the matrices have {}",
                mask.len(),
                predicted.nrows()
            )));
        }
    }
    check_binary("prediction", predicted)?;
    check_binary("truth", truth)?;
    let classes = predicted.ncols();
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    let mut nodes = 0usize;
    for (r, (p_row, t_row)) in predicted.rows().into_iter().zip(truth.rows()).enumerate() {
        if mask.is_some_and(|m| !m[r]) {
            continue;
        }
        nodes += 1;
        for (c, (&p, &t)) in p_row.iter().zip(t_row.iter()).enumerate() {
            match (p == 1.0, t == 1.0) {
                (true, true) => tp[c] += 1,
                (true, false) => fp[c] += 1,
                (false, true) => fn_[c] += 1,
                (false, false) => {}
            }
        }
    }
    let per_class: Vec<ClassCounts> = (0..classes)
        .map(|c| ClassCounts {
            true_positives: tp[c],
            false_positives: fp[c],
            false_negatives: fn_[c],
            f1: f1_from_counts(tp[c], fp[c], fn_[c]),
        })
        .collect();
    let (tps, fps, fns) = (
        tp.iter().sum::<usize>(),
        fp.iter().sum::<usize>(),
        fn_.iter().sum::<usize>(),
    );
    let macro_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|c| c.f1).sum::<f64>() / per_class.len() as f64
    };
    Ok(EvalReport {
        micro_f1: f1_from_counts(tps, fps, fns),
        macro_f1,
        per_class,
        nodes,
    })
}

impl EvalReport {
    /// Multi-line human-readable rendering.
    pub fn format_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("nodes evaluated: {}\n", self.nodes));
        out.push_str(&format!("micro-F1: {:.6}\n", self.micro_f1));
        out.push_str(&format!("macro-F1: {:.6}\n", self.macro_f1));
        for (c, counts) in self.per_class.iter().enumerate() {
            out.push_str(&format!(
                "class {c}: f1 {:.6} (tp {}, fp {}, fn {})\n",
                counts.f1, counts.true_positives, counts.false_positives, counts.false_negatives
            ));
        }
        out
    }

    /// `key value` lines for machine consumption.
    pub fn format_keyvalue(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("nodes {}\n", self.nodes));
        out.push_str(&format!("micro_f1 {:.6}\n", self.micro_f1));
        out.push_str(&format!("macro_f1 {:.6}\n", self.macro_f1));
        for (c, counts) in self.per_class.iter().enumerate() {
            out.push_str(&format!("class_{c}_f1 {:.6}\n", counts.f1));
        }
        out
    }
}

/// Converts probability rows into multilabel assignments by taking, for
/// each row, the `k` highest-scoring classes where `k` is the row's true
/// label count. Ties resolve to the lowest class index. This is the
/// usual protocol for multilabel node classification when ground truth
/// is available; it sidesteps threshold calibration.
pub fn topk_assignments(probabilities: &Array2<f64>, truth: &Array2<f64>) -> Result<Array2<f64>> {
    if probabilities.raw_dim() != truth.raw_dim() {
        return Err(CoreError::Validation(format!(
            "probabilities are {:?} but truth is {:?}",
            probabilities.dim(),
            truth.dim()
        )));
    }
    check_binary("truth", truth)?;
    let classes = probabilities.ncols();
    let mut out = Array2::zeros(probabilities.raw_dim());
    let mut order: Vec<usize> = Vec::with_capacity(classes);
    for (r, (p_row, t_row)) in probabilities
        .rows()
        .into_iter()
        .zip(truth.rows())
        .enumerate()
    {
        let k = t_row.iter().filter(|&&t| t == 1.0).count();
        if k == 0 {
            continue;
        }
        order.clear();
        order.extend(0..classes);
        // Stable sort by descending probability keeps lower indices
        // first among ties.
        order.sort_by(|&a, &b| p_row[b].partial_cmp(&p_row[a]).unwrap_or(std::cmp::Ordering::Equal));
        for &c in order.iter().take(k) {
            out[[r, c]] = 1.0;
        }
    }
    Ok(out)
}

/// Predicts `net`'s nodes with `model` and scores the result against the
/// labels carried by `net`. Only labeled nodes enter the counts.
///
/// Multiclass models are scored on their argmax assignments; multilabel
/// models on [`topk_assignments`] of their probabilities.
pub fn evaluate_network(model: &TrainedModel, net: &AttributedNetwork) -> Result<EvalReport> {
    let labels = net.labels().ok_or_else(|| {
        CoreError::Validation("cannot evaluate on a network without labels".into())
    })?;
    if labels.classes() > model.n_classes {
        return Err(CoreError::Validation(format!(
            "network labels use {} classes but the model only knows {}",
            labels.classes(),
            model.n_classes
        )));
    }
    let mut labels = labels.clone();
    labels.pad_classes(model.n_classes);
    let mask: Vec<bool> = (0..net.node_count()).map(|i| labels.is_labeled(i)).collect();
    let predictions = predict(model, net)?;
    let assignments = match model.params.label_mode {
        LabelMode::Multiclass => predictions.assignments,
        LabelMode::Multilabel => topk_assignments(&predictions.probabilities, labels.matrix())?,
    };
    f1_scores(&assignments, labels.matrix(), Some(&mask))
}

/// Micro-F1 of always predicting the most frequent labeled class —
/// the floor any useful model has to clear.
pub fn majority_baseline_micro_f1(net: &AttributedNetwork) -> Result<f64> {
    let labels = net.labels().ok_or_else(|| {
        CoreError::Validation("cannot compute a baseline without labels".into())
    })?;
    let matrix = labels.matrix();
    let mut counts = vec![0usize; labels.classes()];
    for i in 0..net.node_count() {
        if !labels.is_labeled(i) {
            continue;
        }
        for (c, count) in counts.iter_mut().enumerate() {
            if matrix[[i, c]] == 1.0 {
                *count += 1;
            }
        }
    }
    let majority = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c)
        .unwrap_or(0);
    let mut predicted = Array2::zeros(matrix.raw_dim());
    for i in 0..net.node_count() {
        predicted[[i, majority]] = 1.0;
    }
    let mask: Vec<bool> = (0..net.node_count()).map(|i| labels.is_labeled(i)).collect();
    Ok(f1_scores(&predicted, matrix, Some(&mask))?.micro_f1)
}
