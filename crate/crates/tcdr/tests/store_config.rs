use serde_json::json;
use tcdr::config::RunConfig;
use tcdr::store::{ResultRecord, ResultsStore, LOCK_FILE};

fn rec(key: &str) -> ResultRecord {
    ResultRecord {
        key: key.into(),
        campaign: "main".into(),
        config_fingerprint: "f".into(),
        payload: json!({ "row": ["m", "1.00"] }),
    }
}

#[test]
fn duplicate_keys_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = ResultsStore::open(dir.path()).unwrap();
    s.append(&rec("a")).unwrap();
    let err = s.append(&rec("a")).unwrap_err();
    assert_eq!(err.exit_code(), 7);
    assert_eq!(s.records().unwrap().len(), 1);
}

#[test]
fn records_survive_reopen() {
    let dir = tempfile::tempdir().unwrap();
    {
        let mut s = ResultsStore::open(dir.path()).unwrap();
        s.append(&rec("a")).unwrap();
        s.append(&rec("b")).unwrap();
    }
    let mut s = ResultsStore::open(dir.path()).unwrap();
    assert!(s.contains("a") && s.contains("b") && !s.contains("c"));
    assert_eq!(s.records().unwrap(), vec![rec("a"), rec("b")]);
    assert!(s.append(&rec("b")).is_err());
}

#[test]
fn second_writer_is_locked_out() {
    let dir = tempfile::tempdir().unwrap();
    let s = ResultsStore::open(dir.path()).unwrap();
    assert!(dir.path().join(LOCK_FILE).exists());
    assert_eq!(ResultsStore::open(dir.path()).unwrap_err().exit_code(), 7);
    drop(s);
    assert!(!dir.path().join(LOCK_FILE).exists());
    ResultsStore::open(dir.path()).unwrap();
}

#[test]
fn tables_are_written_with_their_header() {
    let dir = tempfile::tempdir().unwrap();
    let s = ResultsStore::open(dir.path()).unwrap();
    let path = s
        .write_table("t.csv", &["Model", "45 dB"], &[vec!["x".into(), "99.00".into()]])
        .unwrap();
    assert_eq!(std::fs::read_to_string(path).unwrap(), "Model,45 dB\nx,99.00\n");
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = RunConfig::default();
    let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.fingerprint(), cfg.fingerprint());
}

#[test]
fn partial_config_keeps_defaults() {
    let cfg = RunConfig::from_toml("seed = 7\n[train]\nepochs = 3\n").unwrap();
    let d = RunConfig::default();
    assert_eq!(cfg.seed, 7);
    assert_eq!(cfg.train.epochs, 3);
    assert_eq!(cfg.train.learning_rate, d.train.learning_rate);
    assert_eq!(cfg.eval, d.eval);
    assert_eq!(cfg.generate, d.generate);
    assert_ne!(cfg.fingerprint(), d.fingerprint());
}

#[test]
fn defaults_match_the_protocol() {
    let d = RunConfig::default();
    assert_eq!(d.seed, 42);
    assert_eq!(d.dataset.split.train_fraction, 0.8);
    assert_eq!(d.dataset.split.seed, 42);
    assert_eq!(d.eval.snr_levels, vec![45.0, 40.0, 35.0, 30.0]);
    assert_eq!(d.generate.complex_holdout, 2000);
    assert_eq!(d.train.batch_size, 16);
}

#[test]
fn bad_values_are_config_errors() {
    for text in [
        "[dataset]\nval_fraction = 1.5\n",
        "[train]\nepochs = 0\n",
        "[eval]\nsnr_levels = [45.0, -3.0]\n",
        "[dataset.split]\ntrain_fraction = 1.0\n",
        "seed = \"x\"\n",
    ] {
        let err = RunConfig::from_toml(text).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{text}");
    }
}
