//! Encoder fine-tuning (full and low-rank adapters), prediction, and the
//! numeric-window baselines.

pub mod baselines;
mod encoder;
mod train;

pub use encoder::{params_digest, Architecture, EncoderAsset, EncoderConfig, Pooling};
pub use train::{fine_tune, fine_tune_lora, LogRow, TrainLog};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::hex;
use crate::error::{Error, Result};
use crate::nn::{Matrix, ParamStore, Tape};
use crate::signal::Label;
use crate::textualizer::TokenizedSample;

use encoder::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub weight_decay: f32,
    pub logging_steps: usize,
    /// Global gradient-norm clip; 0 disables.
    pub max_grad_norm: f32,
    pub seed: u64,
}

/// Defaults for the compact encoder trained from random initialization.
impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            learning_rate: 1e-3,
            batch_size: 16,
            weight_decay: 0.01,
            logging_steps: 10,
            max_grad_norm: 1.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    /// Fine-tuning recipe for a pretrained checkpoint.
    pub fn pretrained() -> Self {
        Self {
            learning_rate: 2e-5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate {} must be > 0", self.learning_rate)));
        }
        if self.batch_size == 0 || self.logging_steps == 0 {
            return Err(Error::Config("batch size and logging steps must be positive".into()));
        }
        if self.weight_decay < 0.0 || self.max_grad_norm < 0.0 {
            return Err(Error::Config("weight decay and gradient clip must be >= 0".into()));
        }
        Ok(())
    }

    /// Hex sha256 of the canonical field listing.
    pub fn fingerprint(&self) -> String {
        let canon = format!(
            "epochs={};lr={:e};batch={};wd={:e};log={};clip={:e};seed={}",
            self.epochs,
            self.learning_rate,
            self.batch_size,
            self.weight_decay,
            self.logging_steps,
            self.max_grad_norm,
            self.seed
        );
        hex(&Sha256::digest(canon.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f32,
    pub adapter_dropout: f32,
    pub frozen_base: bool,
}

impl Default for LoraConfig {
    fn default() -> Self {
        Self {
            rank: 8,
            alpha: 32.0,
            adapter_dropout: 0.05,
            frozen_base: true,
        }
    }
}

impl LoraConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("LoRA rank must be >= 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config("LoRA alpha must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.adapter_dropout) {
            return Err(Error::Config("adapter dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Class index to label; index 1 is the positive class.
pub const LABEL_MAP: [Label; 2] = [Label::Fault, Label::Attack];

/// A fine-tuned encoder with its head and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub encoder_asset_id: String,
    pub encoder_config: EncoderConfig,
    pub lora: Option<LoraConfig>,
    pub params: ParamStore,
    pub tokenizer_contract_id: String,
    pub train_config_fingerprint: String,
    pub label_map: [Label; 2],
    pub log: TrainLog,
    /// Base encoder parameter count (head and adapters excluded).
    pub base_parameter_count: usize,
    pub trainable_parameter_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Probability of ATTACK.
    pub probability: f64,
    /// Per class, in label-map order.
    pub probabilities: [f64; 2],
}

impl Prediction {
    pub(crate) fn from_logits(logits: [f64; 2]) -> Self {
        let m = logits[0].max(logits[1]);
        let e0 = crate::math::exp(logits[0] - m);
        let e1 = crate::math::exp(logits[1] - m);
        let p1 = e1 / (e0 + e1);
        Self {
            label: if p1 >= 0.5 { Label::Attack } else { Label::Fault },
            probability: p1,
            probabilities: [1.0 - p1, p1],
        }
    }

    /// From an ATTACK probability or score in `[0, 1]`.
    pub fn from_probability(p1: f64) -> Self {
        Self {
            label: if p1 >= 0.5 { Label::Attack } else { Label::Fault },
            probability: p1,
            probabilities: [1.0 - p1, p1],
        }
    }
}

/// Unpadded token ids of a sample.
pub(crate) fn active_ids(sample: &TokenizedSample) -> Vec<u32> {
    sample
        .token_ids
        .iter()
        .zip(&sample.attention_mask)
        .filter(|(_, m)| **m)
        .map(|(i, _)| *i)
        .collect()
}

impl ModelBundle {
    /// Share of the base encoder's size that training updated.
    pub fn trainable_fraction(&self) -> f64 {
        self.trainable_parameter_count as f64 / self.base_parameter_count.max(1) as f64
    }

    fn check_contract(&self, sample: &TokenizedSample) -> Result<()> {
        if sample.contract_id != self.tokenizer_contract_id {
            return Err(Error::ContractMismatch {
                expected: self.tokenizer_contract_id.clone(),
                got: sample.contract_id.clone(),
            });
        }
        Ok(())
    }

    fn network(&self) -> Result<Network> {
        Network::resolve(&self.params, &self.encoder_config, self.lora.as_ref())
    }

    pub fn predict(&self, sample: &TokenizedSample) -> Result<Prediction> {
        self.check_contract(sample)?;
        let net = self.network()?;
        let mut tape = Tape::inference(&self.params);
        let out = net.forward(&mut tape, &active_ids(sample), None)?;
        let l = tape.value(out.logits);
        Ok(Prediction::from_logits([l.data[0] as f64, l.data[1] as f64]))
    }

    pub fn predict_batch(&self, samples: &[TokenizedSample]) -> Result<Vec<Prediction>> {
        samples.iter().map(|s| self.predict(s)).collect()
    }

    /// Attention probabilities per `[layer][head]` over the unpadded tokens,
    /// computed in `f64` from the encoder's scaled scores.
    pub fn attention(&self, sample: &TokenizedSample) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
        self.check_contract(sample)?;
        let net = self.network()?;
        let mut tape = Tape::inference(&self.params);
        let out = net.forward(&mut tape, &active_ids(sample), None)?;
        let heads = self.encoder_config.heads;
        let causal = self.encoder_config.causal();
        let mut layers = Vec::with_capacity(self.encoder_config.layers);
        for chunk in out.scores.chunks(heads) {
            let per_head = chunk
                .iter()
                .map(|s| softmax_rows_f64(tape.value(*s), causal))
                .collect();
            layers.push(per_head);
        }
        Ok(layers)
    }
}

pub(crate) fn softmax_rows_f64(scores: &Matrix, causal: bool) -> Vec<Vec<f64>> {
    (0..scores.rows)
        .map(|r| {
            let limit = if causal { (r + 1).min(scores.cols) } else { scores.cols };
            let row = scores.row(r);
            let max = row[..limit].iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v as f64));
            let mut out: Vec<f64> = (0..scores.cols)
                .map(|c| if c < limit { crate::math::exp(row[c] as f64 - max) } else { 0.0 })
                .collect();
            let sum: f64 = out.iter().sum();
            out.iter_mut().for_each(|v| *v /= sum);
            out
        })
        .collect()
}
