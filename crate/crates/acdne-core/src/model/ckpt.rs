//! Saving and loading trained models.
//!
//! A checkpoint stores the full training configuration and input-space
//! description as metadata plus every parameter tensor, in the fixed
//! optimizer order. Serialization is deterministic: saving the same
//! model twice produces identical bytes.

use std::path::Path;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::TensorContainer;
use crate::error::{CoreError, Result};
use crate::graph::LabelMode;
use crate::nn::DenseLayer;

use super::train::TrainedModel;
use super::{ModelParams, ModelVariant, TrainConfig};

fn layer_names(params: &ModelParams) -> Vec<String> {
    let mut names = Vec::new();
    if let Some(b) = &params.fe1 {
        names.extend((0..b.len()).map(|i| format!("fe1.{i}")));
    }
    if let Some(b) = &params.fe2 {
        names.extend((0..b.len()).map(|i| format!("fe2.{i}")));
    }
    names.push("concat".into());
    names.push("cls".into());
    names.extend((0..params.disc.len()).map(|i| format!("disc.{i}")));
    names
}

fn usize_list(values: &[usize]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Writes `model` to `path`.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let mut c = TensorContainer::new();
    let cfg = &model.config;
    c.set_meta("variant", cfg.variant.as_str())?;
    c.set_meta("label_mode", model.params.label_mode.as_str())?;
    c.set_meta("k_steps", &cfg.k_steps.to_string())?;
    c.set_meta("fe_hidden", &usize_list(&cfg.fe_hidden))?;
    c.set_meta("embed_dim", &cfg.embed_dim.to_string())?;
    c.set_meta("disc_hidden", &usize_list(&cfg.disc_hidden))?;
    c.set_meta("batch_size", &cfg.batch_size.to_string())?;
    c.set_meta("epochs", &cfg.epochs.to_string())?;
    c.set_meta("mu0", &cfg.mu0.to_string())?;
    c.set_meta("lambda_max", &cfg.lambda_max.to_string())?;
    c.set_meta("pair_weight", &cfg.pair_weight.to_string())?;
    c.set_meta("momentum", &cfg.momentum.to_string())?;
    c.set_meta("l2_weight", &cfg.l2_weight.to_string())?;
    c.set_meta("seed", &cfg.seed.to_string())?;
    c.set_meta("attr_dim", &model.attr_dim.to_string())?;
    c.set_meta("n_classes", &model.n_classes.to_string())?;
    if let Some(names) = &model.attr_names {
        // Tab-separated; names with tabs would be ambiguous to split.
        if let Some(bad) = names.iter().find(|n| n.contains('\t') || n.contains('\n')) {
            return Err(CoreError::Validation(format!(
                "attribute name {bad:?} contains a tab or newline and cannot be checkpointed"
            )));
        }
        c.set_meta("attr_names", &names.join("\t"))?;
    }
    let names = layer_names(&model.params);
    for (name, layer) in names.iter().zip(model.params.layer_refs()) {
        c.push_tensor(&format!("{name}.w"), layer.w.clone())?;
        c.push_tensor(
            &format!("{name}.b"),
            layer.b.view().insert_axis(Axis(0)).to_owned(),
        )?;
    }
    c.save(path)
}

fn meta_usize(c: &TensorContainer, key: &str) -> Result<usize> {
    c.require_meta(key)?.parse().map_err(|_| {
        CoreError::Validation(format!(
            "checkpoint metadata {key:?} is not a valid count: {:?}",
            c.meta(key).unwrap_or_default()
        ))
    })
}

fn meta_f64(c: &TensorContainer, key: &str) -> Result<f64> {
    c.require_meta(key)?.parse().map_err(|_| {
        CoreError::Validation(format!(
            "checkpoint metadata {key:?} is not a valid number: {:?}",
            c.meta(key).unwrap_or_default()
        ))
    })
}

fn meta_usize_list(c: &TensorContainer, key: &str) -> Result<Vec<usize>> {
    let raw = c.require_meta(key)?;
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|f| {
            f.parse().map_err(|_| {
                CoreError::Validation(format!(
                    "checkpoint metadata {key:?} holds a bad entry {f:?}"
                ))
            })
        })
        .collect()
}

fn take_layer(c: &TensorContainer, name: &str, layer: &mut DenseLayer) -> Result<()> {
    let w: &Array2<f64> = c.require_tensor(&format!("{name}.w"))?;
    let b = c.require_tensor(&format!("{name}.b"))?;
    if w.raw_dim() != layer.w.raw_dim() {
        return Err(CoreError::Validation(format!(
            "tensor {name}.w is {:?} but the declared architecture needs {:?}",
            w.dim(),
            layer.w.dim()
        )));
    }
    if b.nrows() != 1 || b.ncols() != layer.b.len() {
        return Err(CoreError::Validation(format!(
            "tensor {name}.b is {:?} but the declared architecture needs 1x{}",
            b.dim(),
            layer.b.len()
        )));
    }
    layer.w.assign(w);
    layer.b.assign(&b.row(0));
    Ok(())
}

/// Reads a model written by [`save_model`].
pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let c = TensorContainer::load(path)?;
    let variant = ModelVariant::parse(c.require_meta("variant")?)?;
    let label_mode = LabelMode::parse(c.require_meta("label_mode")?)?;
    let config = TrainConfig {
        k_steps: meta_usize(&c, "k_steps")?,
        fe_hidden: meta_usize_list(&c, "fe_hidden")?,
        embed_dim: meta_usize(&c, "embed_dim")?,
        disc_hidden: meta_usize_list(&c, "disc_hidden")?,
        batch_size: meta_usize(&c, "batch_size")?,
        epochs: meta_usize(&c, "epochs")?,
        mu0: meta_f64(&c, "mu0")?,
        lambda_max: meta_f64(&c, "lambda_max")?,
        pair_weight: meta_f64(&c, "pair_weight")?,
        momentum: meta_f64(&c, "momentum")?,
        l2_weight: meta_f64(&c, "l2_weight")?,
        seed: c.require_meta("seed")?.parse().map_err(|_| {
            CoreError::Validation("checkpoint metadata \"seed\" is not an integer".into())
        })?,
        variant,
    };
    let attr_dim = meta_usize(&c, "attr_dim")?;
    let n_classes = meta_usize(&c, "n_classes")?;
    let attr_names: Option<Vec<String>> = c
        .meta("attr_names")
        .map(|v| v.split('\t').map(str::to_string).collect());
    if let Some(names) = &attr_names {
        if names.len() != attr_dim {
            return Err(CoreError::Validation(format!(
                "checkpoint names {} attributes but declares attr_dim {attr_dim}",
                names.len()
            )));
        }
        let mut sorted = names.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(CoreError::Validation(
                "checkpoint attribute names contain duplicates".into(),
            ));
        }
    }
    // Rebuild the architecture (shapes and activations) from the config,
    // then overwrite every tensor with the stored values.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = ModelParams::init(&config, attr_dim, n_classes, label_mode, &mut rng)?;
    let names = layer_names(&params);
    let declared: usize = names.len() * 2;
    let stored = c.tensor_names().count();
    if stored != declared {
        return Err(CoreError::Validation(format!(
            "checkpoint stores {stored} tensors but the declared architecture has {declared}"
        )));
    }
    let mut cursor = 0usize;
    if let Some(b) = params.fe1.as_mut() {
        for layer in b.iter_mut() {
            take_layer(&c, &names[cursor], layer)?;
            cursor += 1;
        }
    }
    if let Some(b) = params.fe2.as_mut() {
        for layer in b.iter_mut() {
            take_layer(&c, &names[cursor], layer)?;
            cursor += 1;
        }
    }
    take_layer(&c, &names[cursor], &mut params.concat)?;
    cursor += 1;
    take_layer(&c, &names[cursor], &mut params.classifier)?;
    cursor += 1;
    for layer in params.disc.iter_mut() {
        take_layer(&c, &names[cursor], layer)?;
        cursor += 1;
    }
    Ok(TrainedModel {
        params,
        config,
        attr_names,
        attr_dim,
        n_classes,
    })
}
