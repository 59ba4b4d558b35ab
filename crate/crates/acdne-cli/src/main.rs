//! Command-line frontend: train a cross-network embedding model, apply
//! it, score predictions, generate synthetic benchmark pairs, and dump
//! embeddings.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 numeric
//! divergence during training, 3 I/O failure.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use acdne_core::eval::{evaluate_network, f1_scores};
use acdne_core::graph::io::{load_labels, load_network, write_network_files};
use acdne_core::model::ckpt::{load_model, save_model};
use acdne_core::model::predict::{embed_network, predict};
use acdne_core::model::train::{train, EpochStats, TrainOutput};
use acdne_core::synth::generate_pair;
use acdne_core::{align_attributes, CoreError, LabelMode, TrainConfig};

use config::{GenOverrides, TrainOverrides};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;
pub const EXIT_IO: u8 = 3;

/// A command failure: what to print and which exit code to use.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Io { .. } => EXIT_IO,
            CoreError::Numeric(_) => EXIT_DIVERGED,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: String) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message,
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "acdne",
    version,
    about = "Cross-network node classification via adversarial network embedding",
    long_about = "Learns node embeddings in which a labeled source network and an \
                  unlabeled target network are statistically aligned, then classifies \
                  the target's nodes. Networks are given as an edge list, an attribute \
                  matrix, and (for supervision) a label file."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a labeled source network and an unlabeled target
    /// network; writes a checkpoint, a training log, and a run manifest.
    Train(TrainArgs),
    /// Classify the nodes of a network with a trained model.
    Predict(PredictArgs),
    /// Score predictions against ground-truth labels.
    Eval(EvalArgs),
    /// Generate a synthetic source/target network pair with a controlled
    /// domain shift.
    Gen(GenArgs),
    /// Write the embedding of every node of a network to a text matrix.
    ExportEmbeddings(ExportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Source edge list: one "i<TAB>j" pair per line, 0-based indices.
    #[arg(long, value_name = "FILE")]
    source_edges: PathBuf,
    /// Source attributes: sparse "node attr value" triplets under an
    /// "n d" header, or dense CSV with an optional name header.
    #[arg(long, value_name = "FILE")]
    source_attrs: PathBuf,
    /// Source labels: "node<TAB>k1[,k2,...]" lines, 0-based classes.
    #[arg(long, value_name = "FILE")]
    source_labels: PathBuf,
    /// Target edge list.
    #[arg(long, value_name = "FILE")]
    target_edges: PathBuf,
    /// Target attributes.
    #[arg(long, value_name = "FILE")]
    target_attrs: PathBuf,
    /// Label semantics: "multiclass" (one class per node) or
    /// "multilabel" (any number of classes per node).
    #[arg(long, value_name = "MODE", default_value = "multiclass")]
    label_mode: String,
    /// Output directory for model.ckpt, training_log.csv, manifest.json.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Flat "key = value" config file; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for initialization and batch order; fixing it makes the run
    /// bit-reproducible.
    #[arg(long)]
    seed: Option<u64>,
    /// Training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate; decays as mu0 / (1 + 10p)^0.75 over
    /// training progress p.
    #[arg(long)]
    mu0: Option<f64>,
    /// Weight of the pairwise proximity constraint. The default 0.1
    /// suits sparse bag-of-words attributes (citation networks); use
    /// about 1e-3 for dense attribute spaces such as social networks.
    #[arg(long)]
    p_weight: Option<f64>,
    /// Cap of the adversarial weight ramp 2/(1+exp(-10p)) - 1. Zero
    /// disables the adversarial signal entirely.
    #[arg(long)]
    lambda_max_override: Option<f64>,
    /// Model variant: full, no-fe1, no-fe2, no-pairwise, no-classifier,
    /// or no-discriminator.
    #[arg(long, value_name = "NAME")]
    variant: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model checkpoint.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Edge list of the network to classify.
    #[arg(long, value_name = "FILE")]
    edges: PathBuf,
    /// Attribute file of the network to classify.
    #[arg(long, value_name = "FILE")]
    attrs: PathBuf,
    /// Where to write assignments in label-file format
    /// ("node<TAB>k1[,k2,...]"). Multilabel nodes with no class scoring
    /// at least 0.5 are omitted.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the full probability matrix ("n c" header, one row of
    /// scores per node).
    #[arg(long, value_name = "FILE")]
    probabilities_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained model checkpoint; evaluates the model directly on the
    /// network given by --edges/--attrs. Mutually exclusive with
    /// --predictions.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Edge list (with --model).
    #[arg(long, value_name = "FILE")]
    edges: Option<PathBuf>,
    /// Attribute file (with --model).
    #[arg(long, value_name = "FILE")]
    attrs: Option<PathBuf>,
    /// Predicted assignments in label-file format, e.g. from `predict
    /// --out`. Mutually exclusive with --model.
    #[arg(long, value_name = "FILE")]
    predictions: Option<PathBuf>,
    /// Ground-truth labels.
    #[arg(long, value_name = "FILE")]
    labels: PathBuf,
    /// Label semantics for --predictions mode: "multiclass" or
    /// "multilabel". With --model the checkpoint decides.
    #[arg(long, value_name = "MODE", default_value = "multiclass")]
    label_mode: String,
    /// Report format: "text" or "kv" (machine-readable key value lines).
    #[arg(long, value_name = "FMT", default_value = "text")]
    format: String,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory for source.* and target.* files plus a manifest.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Flat "key = value" generator config; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Generator seed; the same seed always yields the same files.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of classes.
    #[arg(long)]
    classes: Option<usize>,
    /// Source node count.
    #[arg(long)]
    n_source: Option<usize>,
    /// Target node count.
    #[arg(long)]
    n_target: Option<usize>,
    /// Attribute dimension.
    #[arg(long)]
    attr_dim: Option<usize>,
    /// Edge probability within a class.
    #[arg(long)]
    p_in: Option<f64>,
    /// Edge probability across classes.
    #[arg(long)]
    p_out: Option<f64>,
    /// Probability of a 1 in a node's class-aligned attribute block.
    #[arg(long)]
    signal: Option<f64>,
    /// Domain shift: share of the target's 1-cells cleared and of its
    /// 0-cells set after generation.
    #[arg(long)]
    flip_rate: Option<f64>,
}

#[derive(Args)]
struct ExportArgs {
    /// Trained model checkpoint.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Edge list of the network to embed.
    #[arg(long, value_name = "FILE")]
    edges: PathBuf,
    /// Attribute file of the network to embed.
    #[arg(long, value_name = "FILE")]
    attrs: PathBuf,
    /// Output file: "n d" header, then one whitespace-separated
    /// embedding row per node.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Eval(args) => cmd_eval(&args),
        Command::Gen(args) => cmd_gen(&args),
        Command::ExportEmbeddings(args) => cmd_export(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Rejects a missing or unreadable input up front, naming the flag that
/// pointed at it.
fn require_input(flag: &str, path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!(
            "{flag}: {} does not exist or is not a file",
            path.display()
        )))
    }
}

fn sha256_hex(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn epoch_line(s: &EpochStats) -> String {
    format!(
        "epoch {}  L_y {:.6}  L_p {:.6}  L_d {:.6}  mu {:.6}  lambda {:.6}",
        s.epoch, s.class_loss, s.pair_loss, s.domain_loss, s.lr, s.lambda
    )
}

/// The training log as CSV. Plain `{}` float formatting keeps the file
/// byte-identical across reruns of the same seed.
fn training_log_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,L_y,L_p,L_d,mu,lambda\n");
    for s in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.epoch, s.class_loss, s.pair_loss, s.domain_loss, s.lr, s.lambda
        );
    }
    out
}

fn config_json(c: &TrainConfig) -> serde_json::Value {
    serde_json::json!({
        "k-steps": c.k_steps,
        "fe-hidden": c.fe_hidden,
        "embed-dim": c.embed_dim,
        "disc-hidden": c.disc_hidden,
        "batch-size": c.batch_size,
        "epochs": c.epochs,
        "mu0": c.mu0,
        "lambda-max": c.lambda_max,
        "p-weight": c.pair_weight,
        "momentum": c.momentum,
        "l2-weight": c.l2_weight,
        "seed": c.seed,
        "variant": c.variant.as_str(),
    })
}

fn cmd_train(args: &TrainArgs) -> CmdResult {
    let inputs = [
        ("--source-edges", &args.source_edges),
        ("--source-attrs", &args.source_attrs),
        ("--source-labels", &args.source_labels),
        ("--target-edges", &args.target_edges),
        ("--target-attrs", &args.target_attrs),
    ];
    for (flag, path) in &inputs {
        require_input(flag, path)?;
    }
    if let Some(path) = &args.config {
        require_input("--config", path)?;
    }
    let mode = LabelMode::parse(&args.label_mode)?;
    let flags = TrainOverrides {
        seed: args.seed,
        epochs: args.epochs,
        mu0: args.mu0,
        p_weight: args.p_weight,
        lambda_max: args.lambda_max_override,
        variant: args.variant.clone(),
    };
    let config = config::resolve_train(args.config.as_deref(), &flags)?;

    let source = load_network(
        &args.source_edges,
        &args.source_attrs,
        Some(&args.source_labels),
        mode,
    )?;
    let target = load_network(&args.target_edges, &args.target_attrs, None, mode)?;
    let pair = align_attributes(source, target)?;

    let started = Instant::now();
    let out: TrainOutput = train(&pair, &config)?;
    let duration = started.elapsed().as_secs_f64();

    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    save_model(&out.model, &args.out.join("model.ckpt"))?;
    write_text(
        &args.out.join("training_log.csv"),
        &training_log_csv(&out.history),
    )?;

    let input_records: Vec<serde_json::Value> = inputs
        .iter()
        .map(|(flag, path)| {
            Ok(serde_json::json!({
                "flag": flag,
                "path": path.display().to_string(),
                "sha256": sha256_hex(path)?,
            }))
        })
        .collect::<Result<_, Failure>>()?;
    let manifest = serde_json::json!({
        "command": "train",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "label-mode": mode.as_str(),
        "config": config_json(&config),
        "inputs": input_records,
        "epochs-run": out.history.len(),
        "duration-seconds": duration,
        "diverged": out.divergence.as_ref().map(|d| {
            serde_json::json!({ "epoch": d.epoch, "batch": d.batch, "detail": d.detail })
        }),
    });
    write_text(
        &args.out.join("manifest.json"),
        &format!("{:#}\n", manifest),
    )?;

    for stats in &out.history {
        println!("{}", epoch_line(stats));
    }
    if let Some(d) = &out.divergence {
        return Err(Failure {
            code: EXIT_DIVERGED,
            message: format!(
                "training diverged in epoch {} (batch {}): {}; wrote the last \
                 stable parameters to {}",
                d.epoch,
                d.batch,
                d.detail,
                args.out.join("model.ckpt").display()
            ),
        });
    }
    println!("wrote {}", args.out.join("model.ckpt").display());
    Ok(())
}

/// Writes 0/1 assignment rows as a label file: `node<TAB>k1[,k2,...]`,
/// skipping all-zero rows.
fn assignments_to_label_file(assignments: &ndarray::Array2<f64>) -> String {
    let mut out = String::new();
    for (node, row) in assignments.rows().into_iter().enumerate() {
        let classes: Vec<String> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(c, _)| c.to_string())
            .collect();
        if !classes.is_empty() {
            let _ = writeln!(out, "{node}\t{}", classes.join(","));
        }
    }
    out
}

fn matrix_file(m: &ndarray::Array2<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}

fn cmd_predict(args: &PredictArgs) -> CmdResult {
    require_input("--model", &args.model)?;
    require_input("--edges", &args.edges)?;
    require_input("--attrs", &args.attrs)?;
    let model = load_model(&args.model)?;
    let net = load_network(&args.edges, &args.attrs, None, model.params.label_mode)?;
    let preds = predict(&model, &net)?;
    write_text(&args.out, &assignments_to_label_file(&preds.assignments))?;
    if let Some(path) = &args.probabilities_out {
        write_text(path, &matrix_file(&preds.probabilities))?;
    }
    println!(
        "classified {} nodes into {} classes; wrote {}",
        net.node_count(),
        model.n_classes,
        args.out.display()
    );
    Ok(())
}

/// Largest node index named in a label-format file, if any line parses.
fn scan_max_node(path: &Path) -> Result<Option<usize>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut max = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(v) = line
            .split_whitespace()
            .next()
            .and_then(|f| f.parse::<usize>().ok())
        {
            max = Some(max.map_or(v, |m: usize| m.max(v)));
        }
    }
    Ok(max)
}

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    require_input("--labels", &args.labels)?;
    let report = match (&args.model, &args.predictions) {
        (Some(_), Some(_)) => {
            return Err(usage(
                "--model and --predictions are mutually exclusive".into(),
            ))
        }
        (Some(model_path), None) => {
            let (Some(edges), Some(attrs)) = (&args.edges, &args.attrs) else {
                return Err(usage("--model needs --edges and --attrs".into()));
            };
            require_input("--model", model_path)?;
            require_input("--edges", edges)?;
            require_input("--attrs", attrs)?;
            let model = load_model(model_path)?;
            let net = load_network(edges, attrs, Some(&args.labels), model.params.label_mode)?;
            evaluate_network(&model, &net)?
        }
        (None, Some(pred_path)) => {
            require_input("--predictions", pred_path)?;
            let mode = LabelMode::parse(&args.label_mode)?;
            let n = match (scan_max_node(&args.labels)?, scan_max_node(pred_path)?) {
                (Some(a), Some(b)) => a.max(b) + 1,
                (Some(a), None) => a + 1,
                (None, Some(b)) => b + 1,
                (None, None) => {
                    return Err(usage(format!(
                        "{}: no labeled nodes found",
                        args.labels.display()
                    )))
                }
            };
            let mut truth = load_labels(&args.labels, n, mode)?;
            let mut predicted = load_labels(pred_path, n, mode)?;
            let classes = truth.classes().max(predicted.classes());
            truth.pad_classes(classes);
            predicted.pad_classes(classes);
            let mask: Vec<bool> = (0..n).map(|i| truth.is_labeled(i)).collect();
            f1_scores(predicted.matrix(), truth.matrix(), Some(&mask))?
        }
        (None, None) => {
            return Err(usage(
                "pass either --model (with --edges/--attrs) or --predictions".into(),
            ))
        }
    };
    match args.format.as_str() {
        "text" => print!("{}", report.format_text()),
        "kv" => print!("{}", report.format_keyvalue()),
        other => return Err(usage(format!("unknown --format {other:?}"))),
    }
    Ok(())
}

fn cmd_gen(args: &GenArgs) -> CmdResult {
    if let Some(path) = &args.config {
        require_input("--config", path)?;
    }
    let flags = GenOverrides {
        classes: args.classes,
        n_source: args.n_source,
        n_target: args.n_target,
        attr_dim: args.attr_dim,
        p_in: args.p_in,
        p_out: args.p_out,
        signal: args.signal,
        flip_rate: args.flip_rate,
        seed: args.seed,
    };
    let spec = config::resolve_gen(args.config.as_deref(), &flags)?;
    let pair = generate_pair(&spec)?;
    fs::create_dir_all(&args.out).map_err(|e| io_failure(&args.out, e))?;
    write_network_files(&args.out, "source", &pair.source)?;
    write_network_files(&args.out, "target", &pair.target)?;
    // No wall-clock fields here: the same seed must produce an
    // identical output tree.
    let manifest = serde_json::json!({
        "command": "gen",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": spec.seed,
        "spec": {
            "classes": spec.classes,
            "n-source": spec.n_source,
            "n-target": spec.n_target,
            "attr-dim": spec.attr_dim,
            "p-in": spec.p_in,
            "p-out": spec.p_out,
            "signal": spec.signal,
            "flip-rate": spec.flip_rate,
            "seed": spec.seed,
        },
        "outputs": [
            "source.edges", "source.attrs", "source.labels",
            "target.edges", "target.attrs", "target.labels",
        ],
    });
    write_text(
        &args.out.join("manifest.json"),
        &format!("{:#}\n", manifest),
    )?;
    println!(
        "wrote a {}-class pair ({} + {} nodes) to {}",
        spec.classes,
        spec.n_source,
        spec.n_target,
        args.out.display()
    );
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> CmdResult {
    require_input("--model", &args.model)?;
    require_input("--edges", &args.edges)?;
    require_input("--attrs", &args.attrs)?;
    let model = load_model(&args.model)?;
    let net = load_network(&args.edges, &args.attrs, None, model.params.label_mode)?;
    let embed = embed_network(&model, &net)?;
    write_text(&args.out, &matrix_file(&embed))?;
    println!(
        "wrote {} embeddings of dimension {} to {}",
        embed.nrows(),
        embed.ncols(),
        args.out.display()
    );
    Ok(())
}
