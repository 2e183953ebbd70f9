use std::fs;

use tcdr::bundle::{load_baseline, load_bundle, load_model, save_baseline, save_bundle, StoredModel, WEIGHTS_FILE};
use tcdr_core::classifier::baselines::{train_baseline, BaselineConfig, BaselineKind};
use tcdr_core::classifier::{fine_tune, fine_tune_lora, Architecture, EncoderAsset, LoraConfig, TrainConfig};
use tcdr_core::eval::prepare_samples;
use tcdr_core::scenario::{generate_kept, GeneratorConfig};
use tcdr_core::signal::MeasurementWindow;
use tcdr_core::textualizer::{TemplateId, WordPieceTokenizer};

fn windows(n: usize) -> Vec<MeasurementWindow> {
    generate_kept(&GeneratorConfig::default(), n).unwrap().windows
}

fn tiny() -> TrainConfig {
    TrainConfig {
        epochs: 1,
        batch_size: 4,
        ..TrainConfig::default()
    }
}

#[test]
fn encoder_bundle_round_trips() {
    let tok = WordPieceTokenizer::reference();
    let w = windows(12);
    let train = prepare_samples(&w[..8], TemplateId::Baseline, &tok).unwrap();
    let test = prepare_samples(&w[8..], TemplateId::Baseline, &tok).unwrap();
    for arch in [Architecture::Bidirectional, Architecture::Causal] {
        let asset = EncoderAsset::compact(&tok, arch);
        let bundle = fine_tune(&asset, &train, &[], &tiny()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_bundle(&bundle, dir.path()).unwrap();
        let back = load_bundle(dir.path()).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(back.predict_batch(&test).unwrap(), bundle.predict_batch(&test).unwrap());
        assert!(matches!(load_model(dir.path()).unwrap(), StoredModel::Encoder(_)));
    }
}

#[test]
fn lora_bundle_keeps_adapters_and_frozen_flags() {
    let tok = WordPieceTokenizer::reference();
    let w = windows(8);
    let train = prepare_samples(&w, TemplateId::Baseline, &tok).unwrap();
    let asset = EncoderAsset::compact(&tok, Architecture::Bidirectional);
    let bundle = fine_tune_lora(&asset, &train, &[], &tiny(), &LoraConfig::default()).unwrap();
    assert!(bundle.trainable_fraction() < 1.0);
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&bundle, dir.path()).unwrap();
    let back = load_bundle(dir.path()).unwrap();
    assert_eq!(back, bundle);
    assert_eq!(back.lora, Some(LoraConfig::default()));
}

#[test]
fn truncated_weights_are_rejected() {
    let tok = WordPieceTokenizer::reference();
    let w = windows(8);
    let train = prepare_samples(&w, TemplateId::Baseline, &tok).unwrap();
    let bundle = fine_tune(&EncoderAsset::compact(&tok, Architecture::Bidirectional), &train, &[], &tiny()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_bundle(&bundle, dir.path()).unwrap();
    let path = dir.path().join(WEIGHTS_FILE);
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
    let err = load_bundle(dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}

#[test]
fn baseline_round_trips() {
    let w = windows(60);
    let cfg = BaselineConfig::default();
    for kind in [BaselineKind::LogisticRegression, BaselineKind::DecisionTree, BaselineKind::NaiveBayes] {
        let m = train_baseline(kind, &w[..40], &[], &cfg, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_baseline(&m, dir.path()).unwrap();
        let back = load_baseline(dir.path()).unwrap();
        assert_eq!(back.predict_proba(&w[40..]), m.predict_proba(&w[40..]), "{kind}");
        assert!(matches!(load_model(dir.path()).unwrap(), StoredModel::Baseline(_)));
    }
}

#[test]
fn empty_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(load_model(dir.path()).unwrap_err().exit_code(), 6);
}
