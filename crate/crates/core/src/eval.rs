//! Evaluation campaigns: main test, complex-attack holdout, noise sweep and
//! prompt-variant ablation.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attack::{add_awgn, NoiseSpec};
use crate::classifier::baselines::BaselineModel;
use crate::classifier::{fine_tune, EncoderAsset, ModelBundle, Prediction, TrainConfig};
use crate::dataset::{ensure_disjoint, record_hash, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{metrics, ConfusionMatrix, MetricsReport};
use crate::signal::{Label, MeasurementWindow};
use crate::textualizer::{textualize, PromptTemplate, TemplateId, TokenizedSample, TokenizerAsset};

/// Anything that labels a raw measurement window.
pub trait Detector {
    fn name(&self) -> String;
    fn detect(&self, window: &MeasurementWindow) -> Result<Prediction>;
}

/// Fine-tuned encoder behind the textualization pipeline.
pub struct TextDetector<'a, T: TokenizerAsset + ?Sized> {
    pub bundle: &'a ModelBundle,
    pub tokenizer: &'a T,
    pub template: PromptTemplate,
}

impl<'a, T: TokenizerAsset + ?Sized> TextDetector<'a, T> {
    pub fn new(bundle: &'a ModelBundle, tokenizer: &'a T, template: TemplateId) -> Result<Self> {
        if bundle.tokenizer_contract_id != tokenizer.contract_id() {
            return Err(Error::ContractMismatch {
                expected: bundle.tokenizer_contract_id.clone(),
                got: tokenizer.contract_id().to_string(),
            });
        }
        Ok(Self {
            bundle,
            tokenizer,
            template: PromptTemplate::for_id(template),
        })
    }

    pub fn prepare(&self, window: &MeasurementWindow) -> Result<TokenizedSample> {
        Ok(textualize(window, &self.template, self.tokenizer)?.1)
    }
}

impl<T: TokenizerAsset + ?Sized> Detector for TextDetector<'_, T> {
    fn name(&self) -> String {
        format!("{}/{}", self.bundle.encoder_asset_id, self.template.template_id.code())
    }

    fn detect(&self, window: &MeasurementWindow) -> Result<Prediction> {
        self.bundle.predict(&self.prepare(window)?)
    }
}

impl Detector for BaselineModel {
    fn name(&self) -> String {
        self.kind.code().into()
    }

    fn detect(&self, window: &MeasurementWindow) -> Result<Prediction> {
        Ok(self.predict(core::slice::from_ref(window)).remove(0))
    }
}

/// Always answers the same label.
#[derive(Debug, Clone, Copy)]
pub struct ConstantDetector(pub Label);

impl Detector for ConstantDetector {
    fn name(&self) -> String {
        format!("constant-{}", self.0.as_str())
    }

    fn detect(&self, _: &MeasurementWindow) -> Result<Prediction> {
        Ok(Prediction::from_probability(match self.0 {
            Label::Attack => 1.0,
            Label::Fault => 0.0,
        }))
    }
}

/// Says ATTACK with probability `attack_rate`, independently per window.
/// The draw depends only on the seed and the window content.
#[derive(Debug, Clone, Copy)]
pub struct RandomDetector {
    pub attack_rate: f64,
    pub seed: u64,
}

impl Detector for RandomDetector {
    fn name(&self) -> String {
        format!("random-{}", self.attack_rate)
    }

    fn detect(&self, window: &MeasurementWindow) -> Result<Prediction> {
        let u = unit_draw(self.seed, &record_hash(window));
        Ok(Prediction::from_probability(if u < self.attack_rate { 1.0 } else { 0.0 }))
    }
}

fn derived_seed(seed: u64, key: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key);
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn unit_draw(seed: u64, key: &[u8]) -> f64 {
    (derived_seed(seed, key) >> 11) as f64 / (1u64 << 53) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub scenario_id: String,
    pub truth: Label,
    pub predicted: Label,
    /// ATTACK probability.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub detector: String,
    pub test_fingerprint: String,
    pub report: MetricsReport,
    pub predictions: Vec<PredictionRecord>,
}

/// Scores `detector` on every window; no leakage check.
pub fn evaluate<D: Detector + ?Sized>(detector: &D, test: &Dataset) -> Result<EvalRun> {
    let mut cm = ConfusionMatrix::default();
    let mut predictions = Vec::with_capacity(test.len());
    for w in test.windows() {
        let p = detector
            .detect(w)
            .map_err(|e| annotate(e, &w.scenario_id))?;
        cm.record(w.label, p.label);
        predictions.push(PredictionRecord {
            scenario_id: w.scenario_id.clone(),
            truth: w.label,
            predicted: p.label,
            probability: p.probability,
        });
    }
    Ok(EvalRun {
        detector: detector.name(),
        test_fingerprint: test.fingerprint().into(),
        report: metrics(&cm)?,
        predictions,
    })
}

fn annotate(e: Error, id: &str) -> Error {
    match e {
        Error::Data(m) => Error::Data(format!("{id}: {m}")),
        other => other,
    }
}

/// Main test-set evaluation; refuses to run when test windows also occur in training.
pub fn run_main_eval<D: Detector + ?Sized>(detector: &D, train: &Dataset, test: &Dataset) -> Result<EvalRun> {
    ensure_disjoint(train, test)?;
    evaluate(detector, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexAttackReport {
    pub detector: String,
    pub holdout_fingerprint: String,
    pub attacks: usize,
    pub detected: usize,
    /// Percent of holdout attacks labelled ATTACK.
    pub detection_rate: f64,
    pub predictions: Vec<PredictionRecord>,
}

/// Detection rate on a holdout of combined time-stamp + FDIA attacks.
///
/// Every holdout window must be an attack, share no content with the
/// training set, and come from a scenario absent from training.
pub fn run_complex_attack_eval<D: Detector + ?Sized>(
    detector: &D,
    train: &Dataset,
    holdout: &Dataset,
) -> Result<ComplexAttackReport> {
    if holdout.is_empty() {
        return Err(Error::Data("complex-attack holdout is empty".into()));
    }
    if let Some(w) = holdout.windows().iter().find(|w| w.label != Label::Attack) {
        return Err(Error::Data(format!(
            "holdout contaminated: {} is labelled {}",
            w.scenario_id,
            w.label.as_str()
        )));
    }
    ensure_disjoint(train, holdout)?;
    let train_ids: BTreeSet<&str> = train.windows().iter().map(|w| w.scenario_id.as_str()).collect();
    let reused = holdout
        .windows()
        .iter()
        .filter(|w| train_ids.contains(w.scenario_id.as_str()))
        .count();
    if reused > 0 {
        return Err(Error::Leakage(reused));
    }
    let run = evaluate(detector, holdout)?;
    let detected = run.predictions.iter().filter(|p| p.predicted == Label::Attack).count();
    Ok(ComplexAttackReport {
        detector: run.detector,
        holdout_fingerprint: run.test_fingerprint,
        attacks: holdout.len(),
        detected,
        detection_rate: 100.0 * detected as f64 / holdout.len() as f64,
        predictions: run.predictions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseCell {
    pub snr_db: f64,
    /// Seed of this level; each window's noise seed derives from it and the window's record hash.
    pub noise_seed: u64,
    pub accuracy: f64,
    pub report: MetricsReport,
}

/// Noise seed of one SNR level.
pub fn noise_level_seed(seed: u64, snr_db: f64) -> u64 {
    derived_seed(seed, &snr_db.to_bits().to_le_bytes())
}

/// Adds noise to every raw window of `test` at `snr_db`.
pub fn noisy_copy(test: &Dataset, snr_db: f64, level_seed: u64) -> Result<Dataset> {
    let windows = test
        .windows()
        .iter()
        .map(|w| {
            let s = derived_seed(level_seed, &record_hash(w));
            add_awgn(w, &NoiseSpec::new(snr_db, s)).map_err(|e| Error::Data(format!("{}: {e}", w.scenario_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(windows))
}

/// Accuracy under additive white noise, injected before normalization.
pub fn run_noise_sweep<D: Detector + ?Sized>(
    detector: &D,
    test: &Dataset,
    snr_levels: &[f64],
    seed: u64,
) -> Result<Vec<NoiseCell>> {
    snr_levels
        .iter()
        .map(|&snr| {
            let level_seed = noise_level_seed(seed, snr);
            let noisy = noisy_copy(test, snr, level_seed)?;
            let run = evaluate(detector, &noisy)?;
            Ok(NoiseCell {
                snr_db: snr,
                noise_seed: level_seed,
                accuracy: run.report.accuracy,
                report: run.report,
            })
        })
        .collect()
}

/// Tokenized copies of `windows` under `template`.
pub fn prepare_samples<T: TokenizerAsset + ?Sized>(
    windows: &[MeasurementWindow],
    template: TemplateId,
    tokenizer: &T,
) -> Result<Vec<TokenizedSample>> {
    let t = PromptTemplate::for_id(template);
    windows
        .iter()
        .map(|w| textualize(w, &t, tokenizer).map(|(_, s)| s).map_err(|e| annotate(e, &w.scenario_id)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub template: TemplateId,
    pub run: EvalRun,
    pub best_epoch: usize,
}

/// Splits of one ablation campaign; the same for every template.
pub struct AblationData<'a> {
    pub train: &'a Dataset,
    pub val: &'a Dataset,
    pub test: &'a Dataset,
}

/// Fine-tunes one model per template with the same config and split, then
/// evaluates each on the test set. `on_row` sees each row as it finishes.
pub fn run_prompt_ablation<T: TokenizerAsset + ?Sized>(
    asset: &EncoderAsset,
    tokenizer: &T,
    data: AblationData<'_>,
    templates: &[TemplateId],
    cfg: &TrainConfig,
    mut on_row: Option<Box<dyn FnMut(&AblationRow) + '_>>,
) -> Result<Vec<AblationRow>> {
    if asset.tokenizer_contract_id != tokenizer.contract_id() {
        return Err(Error::ContractMismatch {
            expected: asset.tokenizer_contract_id.clone(),
            got: tokenizer.contract_id().to_string(),
        });
    }
    ensure_disjoint(data.train, data.test)?;
    ensure_disjoint(data.val, data.test)?;
    let mut rows = Vec::with_capacity(templates.len());
    for &template in templates {
        let train = prepare_samples(data.train.windows(), template, tokenizer)?;
        let val = prepare_samples(data.val.windows(), template, tokenizer)?;
        let bundle = fine_tune(asset, &train, &val, cfg)?;
        let detector = TextDetector::new(&bundle, tokenizer, template)?;
        let run = evaluate(&detector, data.test)?;
        let row = AblationRow {
            template,
            run,
            best_epoch: bundle.log.best_epoch,
        };
        if let Some(f) = on_row.as_mut() {
            f(&row);
        }
        rows.push(row);
    }
    Ok(rows)
}
