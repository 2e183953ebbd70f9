use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tcdr(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcdr"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "[generate]\ncount = 120\ncomplex_holdout = 20\n\n[eval]\nlatency_samples = 10\nlatency_warmup = 1\n";

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&tcdr(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&tcdr(dir.path(), &["evaluate", "--campaign", "everything"])), 2);
    assert_eq!(code(&tcdr(dir.path(), &["train", "--model", "bert-huge"])), 2);
    assert_eq!(code(&tcdr(dir.path(), &["--help"])), 0);
}

#[test]
fn config_problems_exit_3_and_missing_files_exit_6() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[train]\nepochs = 0\n").unwrap();
    assert_eq!(code(&tcdr(dir.path(), &["--config", "bad.toml", "generate"])), 3);
    assert_eq!(code(&tcdr(dir.path(), &["--template", "V9", "generate"])), 3);
    assert_eq!(code(&tcdr(dir.path(), &["--config", "nope.toml", "generate"])), 6);
    assert_eq!(code(&tcdr(dir.path(), &["build-dataset"])), 6);
}

#[test]
fn malformed_input_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("data")).unwrap();
    fs::write(dir.path().join("data/train.records"), "x,FAULT,16,1.0,2.0\n").unwrap();
    assert_eq!(code(&tcdr(dir.path(), &["train", "--model", "baseline:nb"])), 4);
}

#[test]
fn baseline_workflow_and_idempotent_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("run.toml"), SMALL).unwrap();
    let run = |args: &[&str]| {
        let mut all = vec!["--config", "run.toml"];
        all.extend_from_slice(args);
        let o = tcdr(p, &all);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let first = run(&["generate"]);
    assert!(first.starts_with("config fingerprint "));
    run(&["build-dataset"]);
    run(&["train", "--model", "baseline:nb"]);
    for campaign in ["main", "complex", "noise", "latency"] {
        run(&["evaluate", "--campaign", campaign, "--model", "baseline:nb"]);
    }
    let again = run(&["evaluate", "--campaign", "main", "--model", "baseline:nb"]);
    assert!(again.contains("already recorded"));

    let table = fs::read_to_string(p.join("results/table_main.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "Model,Cyberattack Detection Rate (%),Accuracy (%),Precision (%),Recall (%),Specificity (%),F1-Score (%)"
    );
    assert!(lines.next().unwrap().starts_with("NAIVE_BAYES,"));
    assert!(lines.next().is_none());
    let noise = fs::read_to_string(p.join("results/table_noise.csv")).unwrap();
    assert!(noise.starts_with("Model,45 dB,40 dB,35 dB,30 dB\n"));
    assert_eq!(
        fs::read_to_string(p.join("results/results.jsonl")).unwrap().lines().count(),
        4
    );
    assert!(!p.join("results/results.lock").exists());

    let o = tcdr(p, &["--config", "run.toml", "explain", "--model", "baseline:nb", "--sample", "x", "--out", "x.png"]);
    assert_eq!(code(&o), 4);
    let test = fs::read_to_string(p.join("data/test.records")).unwrap();
    let id = test.split(',').next().unwrap();
    let o = tcdr(p, &["--config", "run.toml", "explain", "--model", "baseline:nb", "--sample", id, "--out", "x.png"]);
    assert_eq!(code(&o), 5);

    let o = tcdr(p, &["--config", "run.toml", "--seed", "7", "evaluate", "--campaign", "main", "--model", "baseline:nb"]);
    assert_ne!(stdout(&o).lines().next(), first.lines().next());
}
