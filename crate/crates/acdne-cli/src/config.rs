//! Flat key=value configuration files and their merge with command-line
//! flags. Precedence: flags > config file > built-in defaults.

use std::fs;
use std::path::Path;

use acdne_core::model::{ModelVariant, TrainConfig};
use acdne_core::synth::SynthSpec;

use crate::{Failure, EXIT_USAGE};

/// Training hyperparameters settable from the command line. `None`
/// means "not given" so the config file or default shows through.
#[derive(Default)]
pub struct TrainOverrides {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub mu0: Option<f64>,
    pub p_weight: Option<f64>,
    pub lambda_max: Option<f64>,
    pub variant: Option<String>,
}

fn usage(message: String) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message,
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are
/// skipped. Returns (line number, key, value) triples in file order.
fn parse_pairs(path: &Path) -> Result<Vec<(usize, String, String)>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("--config: cannot read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(usage(format!(
                "{}:{}: expected \"key = value\", got {line:?}",
                path.display(),
                idx + 1
            )));
        };
        pairs.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_value<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    key: &str,
    value: &str,
) -> Result<T, Failure> {
    value.parse().map_err(|_| {
        usage(format!(
            "{}:{}: {key} does not accept {value:?}",
            path.display(),
            line
        ))
    })
}

fn parse_dims(path: &Path, line: usize, key: &str, value: &str) -> Result<Vec<usize>, Failure> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|p| parse_value(path, line, key, p.trim()))
        .collect()
}

pub fn parse_variant(value: &str) -> Result<ModelVariant, Failure> {
    ModelVariant::parse(value).map_err(|e| usage(e.to_string()))
}

/// Builds the training configuration: defaults, then the config file,
/// then the flags.
pub fn resolve_train(
    config_path: Option<&Path>,
    flags: &TrainOverrides,
) -> Result<TrainConfig, Failure> {
    let mut config = TrainConfig::default();
    if let Some(path) = config_path {
        for (line, key, value) in parse_pairs(path)? {
            match key.as_str() {
                "k-steps" => config.k_steps = parse_value(path, line, &key, &value)?,
                "fe-hidden" => config.fe_hidden = parse_dims(path, line, &key, &value)?,
                "embed-dim" => config.embed_dim = parse_value(path, line, &key, &value)?,
                "disc-hidden" => config.disc_hidden = parse_dims(path, line, &key, &value)?,
                "batch-size" => config.batch_size = parse_value(path, line, &key, &value)?,
                "epochs" => config.epochs = parse_value(path, line, &key, &value)?,
                "mu0" => config.mu0 = parse_value(path, line, &key, &value)?,
                "lambda-max" => config.lambda_max = parse_value(path, line, &key, &value)?,
                "p-weight" => config.pair_weight = parse_value(path, line, &key, &value)?,
                "momentum" => config.momentum = parse_value(path, line, &key, &value)?,
                "l2-weight" => config.l2_weight = parse_value(path, line, &key, &value)?,
                "seed" => config.seed = parse_value(path, line, &key, &value)?,
                "variant" => config.variant = parse_variant(&value)?,
                _ => {
                    return Err(usage(format!(
                        "{}:{}: unknown training key {key:?}",
                        path.display(),
                        line
                    )))
                }
            }
        }
    }
    if let Some(v) = flags.seed {
        config.seed = v;
    }
    if let Some(v) = flags.epochs {
        config.epochs = v;
    }
    if let Some(v) = flags.mu0 {
        config.mu0 = v;
    }
    if let Some(v) = flags.p_weight {
        config.pair_weight = v;
    }
    if let Some(v) = flags.lambda_max {
        config.lambda_max = v;
    }
    if let Some(v) = &flags.variant {
        config.variant = parse_variant(v)?;
    }
    Ok(config)
}

/// Synthetic-pair parameters settable from the command line.
#[derive(Default)]
pub struct GenOverrides {
    pub classes: Option<usize>,
    pub n_source: Option<usize>,
    pub n_target: Option<usize>,
    pub attr_dim: Option<usize>,
    pub p_in: Option<f64>,
    pub p_out: Option<f64>,
    pub signal: Option<f64>,
    pub flip_rate: Option<f64>,
    pub seed: Option<u64>,
}

/// Builds the generator spec: defaults, then the config file, then flags.
pub fn resolve_gen(
    config_path: Option<&Path>,
    flags: &GenOverrides,
) -> Result<SynthSpec, Failure> {
    let mut spec = SynthSpec::default();
    if let Some(path) = config_path {
        for (line, key, value) in parse_pairs(path)? {
            match key.as_str() {
                "classes" => spec.classes = parse_value(path, line, &key, &value)?,
                "n-source" => spec.n_source = parse_value(path, line, &key, &value)?,
                "n-target" => spec.n_target = parse_value(path, line, &key, &value)?,
                "attr-dim" => spec.attr_dim = parse_value(path, line, &key, &value)?,
                "p-in" => spec.p_in = parse_value(path, line, &key, &value)?,
                "p-out" => spec.p_out = parse_value(path, line, &key, &value)?,
                "signal" => spec.signal = parse_value(path, line, &key, &value)?,
                "flip-rate" => spec.flip_rate = parse_value(path, line, &key, &value)?,
                "seed" => spec.seed = parse_value(path, line, &key, &value)?,
                _ => {
                    return Err(usage(format!(
                        "{}:{}: unknown generator key {key:?}",
                        path.display(),
                        line
                    )))
                }
            }
        }
    }
    if let Some(v) = flags.classes {
        spec.classes = v;
    }
    if let Some(v) = flags.n_source {
        spec.n_source = v;
    }
    if let Some(v) = flags.n_target {
        spec.n_target = v;
    }
    if let Some(v) = flags.attr_dim {
        spec.attr_dim = v;
    }
    if let Some(v) = flags.p_in {
        spec.p_in = v;
    }
    if let Some(v) = flags.p_out {
        spec.p_out = v;
    }
    if let Some(v) = flags.signal {
        spec.signal = v;
    }
    if let Some(v) = flags.flip_rate {
        spec.flip_rate = v;
    }
    if let Some(v) = flags.seed {
        spec.seed = v;
    }
    Ok(spec)
}
