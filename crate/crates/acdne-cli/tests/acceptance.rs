//! Acceptance check for run reproducibility: repeating a `train`
//! invocation with the same seed must write a byte-identical checkpoint
//! and training log.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn acdne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acdne"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn acceptance_9_same_seed_training_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = acdne(&[
        "gen",
        "--out",
        data.to_str().unwrap(),
        "--seed",
        "3",
        "--classes",
        "3",
        "--n-source",
        "60",
        "--n-target",
        "60",
        "--attr-dim",
        "40",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let conf = dir.path().join("train.conf");
    fs::write(
        &conf,
        "k-steps = 2\nfe-hidden = 12\nembed-dim = 8\ndisc-hidden = 8\n\
         batch-size = 20\nepochs = 6\n",
    )
    .unwrap();

    let train = |run_dir: &Path| {
        let out = acdne(&[
            "train",
            "--source-edges",
            data.join("source.edges").to_str().unwrap(),
            "--source-attrs",
            data.join("source.attrs").to_str().unwrap(),
            "--source-labels",
            data.join("source.labels").to_str().unwrap(),
            "--target-edges",
            data.join("target.edges").to_str().unwrap(),
            "--target-attrs",
            data.join("target.attrs").to_str().unwrap(),
            "--config",
            conf.to_str().unwrap(),
            "--seed",
            "42",
            "--out",
            run_dir.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    };

    let run_a = dir.path().join("a");
    let run_b = dir.path().join("b");
    train(&run_a);
    train(&run_b);

    let ckpt_same =
        fs::read(run_a.join("model.ckpt")).unwrap() == fs::read(run_b.join("model.ckpt")).unwrap();
    let log_same = fs::read(run_a.join("training_log.csv")).unwrap()
        == fs::read(run_b.join("training_log.csv")).unwrap();
    let pass = ckpt_same && log_same;
    println!(
        "ACCEPTANCE 9: {} (checkpoint identical: {ckpt_same}, training log identical: {log_same})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass);
}
