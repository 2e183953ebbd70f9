//! Run configuration: one TOML file, overridable from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tcdr_core::attack::DEFAULT_SNR_LEVELS;
use tcdr_core::classifier::baselines::BaselineConfig;
use tcdr_core::classifier::{LoraConfig, TrainConfig};
use tcdr_core::dataset::{hex, SplitSpec};
use tcdr_core::explainer::ImportanceConfig;
use tcdr_core::scenario::GeneratorConfig;
use tcdr_core::textualizer::TemplateId;

use crate::error::{io_err, Error, Result};
use crate::heatmap::HeatmapStyle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub data: PathBuf,
    pub models: PathBuf,
    pub results: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: "data".into(),
            models: "models".into(),
            results: "results".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateSection {
    /// Kept windows wanted in the main synthetic batch.
    pub count: usize,
    /// Kept windows wanted in the combined time-stamp + FDIA holdout.
    pub complex_holdout: usize,
    pub generator: GeneratorConfig,
    /// Seed of the holdout generator; distinct from the main batch.
    pub holdout_seed: u64,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            count: 50_000,
            complex_holdout: 2_000,
            generator: GeneratorConfig::default(),
            holdout_seed: 4242,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    pub split: SplitSpec,
    /// Share of the training split held out for checkpoint selection.
    pub val_fraction: f64,
    /// Stratified subset of the training split to train on, if set.
    pub train_subset: Option<usize>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            split: SplitSpec::default(),
            val_fraction: 0.1,
            train_subset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub snr_levels: Vec<f64>,
    pub noise_seed: u64,
    pub latency_samples: usize,
    pub latency_warmup: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            snr_levels: DEFAULT_SNR_LEVELS.to_vec(),
            noise_seed: 42,
            latency_samples: 10_000,
            latency_warmup: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub template: TemplateId,
    pub paths: Paths,
    pub generate: GenerateSection,
    pub dataset: DatasetSection,
    pub train: TrainConfig,
    pub lora: LoraConfig,
    pub baselines: BaselineConfig,
    pub eval: EvalSection,
    pub explain: ImportanceConfig,
    pub plot: HeatmapStyle,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            template: TemplateId::Baseline,
            paths: Paths::default(),
            generate: GenerateSection::default(),
            dataset: DatasetSection::default(),
            train: TrainConfig::default(),
            lora: LoraConfig::default(),
            baselines: BaselineConfig::default(),
            eval: EvalSection::default(),
            explain: ImportanceConfig::default(),
            plot: HeatmapStyle::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.generate.generator.validate()?;
        self.dataset.split.validate()?;
        self.train.validate()?;
        self.lora.validate()?;
        if !(0.0..1.0).contains(&self.dataset.val_fraction) {
            return Err(Error::Config("dataset.val_fraction must lie in [0, 1)".into()));
        }
        if self.eval.snr_levels.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("eval.snr_levels must be finite and positive".into()));
        }
        if self.plot.width < 64 || self.plot.height < 64 {
            return Err(Error::Config("plot size must be at least 64x64".into()));
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&json)[..8])
    }
}
