use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::macro_f1;
use crate::nn::{AdamW, AdamWConfig, Gradients, Tape};
use crate::signal::Label;
use crate::textualizer::TokenizedSample;

use super::encoder::{add_head, add_lora, Network};
use super::{active_ids, EncoderAsset, LoraConfig, ModelBundle, TrainConfig, LABEL_MAP};

/// One training-log line: mean loss over the last `logging_steps` optimizer
/// steps, or over the whole epoch on the validation row ending each epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    /// Validation macro F1 in `[0, 1]`, on epoch-end rows only.
    pub val_metric: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    /// Epoch (1-based) whose weights were kept.
    pub best_epoch: usize,
    pub best_val_metric: Option<f64>,
    /// Fraction of training samples classified correctly by the kept weights.
    pub train_accuracy: f64,
}

impl TrainLog {
    pub fn epoch_metrics(&self) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.val_metric.map(|m| (r.epoch, m)))
            .collect()
    }
}

/// Full fine-tune of every encoder weight plus a new classification head.
pub fn fine_tune(
    asset: &EncoderAsset,
    train: &[TokenizedSample],
    val: &[TokenizedSample],
    cfg: &TrainConfig,
) -> Result<ModelBundle> {
    run(asset, train, val, cfg, None)
}

/// Frozen encoder with trainable low-rank adapters on the query and value
/// projections; the head is trained as well.
pub fn fine_tune_lora(
    asset: &EncoderAsset,
    train: &[TokenizedSample],
    val: &[TokenizedSample],
    cfg: &TrainConfig,
    lora: &LoraConfig,
) -> Result<ModelBundle> {
    lora.validate()?;
    run(asset, train, val, cfg, Some(*lora))
}

fn labels_of(samples: &[TokenizedSample]) -> Result<Vec<Label>> {
    samples
        .iter()
        .map(|s| {
            s.label
                .ok_or_else(|| Error::Data(format!("sample {} has no label", s.scenario_id)))
        })
        .collect()
}

fn sequence_key(s: &TokenizedSample) -> [u8; 32] {
    let mut h = Sha256::new();
    for id in active_ids(s) {
        h.update(id.to_le_bytes());
    }
    h.finalize().into()
}

fn check_inputs(asset: &EncoderAsset, train: &[TokenizedSample], val: &[TokenizedSample]) -> Result<(Vec<Label>, Vec<Label>)> {
    for s in train.iter().chain(val) {
        if s.contract_id != asset.tokenizer_contract_id {
            return Err(Error::ContractMismatch {
                expected: asset.tokenizer_contract_id.clone(),
                got: s.contract_id.clone(),
            });
        }
    }
    let train_labels = labels_of(train)?;
    let val_labels = labels_of(val)?;
    let classes: BTreeSet<Label> = train_labels.iter().copied().collect();
    if classes.len() < 2 {
        return Err(Error::Data(format!(
            "training set needs both classes, has {} sample(s) of {} class(es)",
            train.len(),
            classes.len()
        )));
    }
    let seen: BTreeSet<[u8; 32]> = train.iter().map(sequence_key).collect();
    let shared = val.iter().filter(|s| seen.contains(&sequence_key(s))).count();
    if shared > 0 {
        return Err(Error::Leakage(shared));
    }
    Ok((train_labels, val_labels))
}

fn predict_labels(bundle: &ModelBundle, samples: &[TokenizedSample]) -> Result<Vec<Label>> {
    Ok(bundle.predict_batch(samples)?.into_iter().map(|p| p.label).collect())
}

fn grad_norm(g: &Gradients, n: usize) -> f32 {
    let mut sq = 0.0f32;
    for i in 0..n {
        if let Some(m) = g.get(crate::nn::ParamId(i)) {
            sq += m.data.iter().map(|x| x * x).sum::<f32>();
        }
    }
    crate::math::sqrtf(sq)
}

fn run(
    asset: &EncoderAsset,
    train: &[TokenizedSample],
    val: &[TokenizedSample],
    cfg: &TrainConfig,
    lora: Option<LoraConfig>,
) -> Result<ModelBundle> {
    cfg.validate()?;
    let (train_labels, val_labels) = check_inputs(asset, train, val)?;
    let config = asset.config.clone();
    let mut params = asset.params.clone();
    let base_parameter_count = params.count();
    if let Some(l) = &lora {
        if l.frozen_base {
            params.freeze_all();
        }
        add_lora(&mut params, &config, l, cfg.seed);
    }
    add_head(&mut params, config.d_model, cfg.seed);
    let trainable_parameter_count = params.trainable_count();
    let mut bundle = ModelBundle {
        encoder_asset_id: asset.asset_id.clone(),
        encoder_config: config.clone(),
        lora,
        params,
        tokenizer_contract_id: asset.tokenizer_contract_id.clone(),
        train_config_fingerprint: cfg.fingerprint(),
        label_map: LABEL_MAP,
        log: TrainLog::default(),
        base_parameter_count,
        trainable_parameter_count,
    };
    let inputs: Vec<Vec<u32>> = train.iter().map(active_ids).collect();
    let targets: Vec<usize> = train_labels.iter().map(|l| l.class_index()).collect();
    let mut opt = AdamW::new(
        AdamWConfig {
            learning_rate: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
            ..AdamWConfig::default()
        },
        &bundle.params,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps_per_epoch = train.len().div_ceil(cfg.batch_size);
    let total_steps = (steps_per_epoch * cfg.epochs) as f32;
    let mut rows = Vec::new();
    let mut best: Option<(f64, usize, crate::nn::ParamStore)> = None;
    let mut window_loss = 0.0f64;
    let mut window_steps = 0usize;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        let mut epoch_loss = 0.0f64;
        let mut epoch_steps = 0usize;
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i as u64) as usize;
            order.swap(i, j);
        }
        for batch in order.chunks(cfg.batch_size) {
            let net = Network::resolve(&bundle.params, &config, lora.as_ref())?;
            let mut grads = Gradients::for_store(&bundle.params);
            let mut batch_loss = 0.0f64;
            for &k in batch {
                let mut tape = Tape::new(&bundle.params);
                let out = net.forward(&mut tape, &inputs[k], Some(&mut rng))?;
                let loss = tape.cross_entropy(out.logits, &[targets[k]]);
                batch_loss += tape.value(loss).data[0] as f64;
                tape.backward_into(loss, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f32);
            if cfg.max_grad_norm > 0.0 {
                let norm = grad_norm(&grads, bundle.params.len());
                if norm > cfg.max_grad_norm {
                    grads.scale(cfg.max_grad_norm / norm);
                }
            }
            let lr = cfg.learning_rate * (1.0 - step as f32 / total_steps);
            opt.step(&mut bundle.params, &grads, lr);
            step += 1;
            window_loss += batch_loss / batch.len() as f64;
            epoch_loss += batch_loss / batch.len() as f64;
            epoch_steps += 1;
            window_steps += 1;
            if step % cfg.logging_steps == 0 {
                rows.push(LogRow {
                    step,
                    epoch,
                    loss: window_loss / window_steps as f64,
                    val_metric: None,
                });
                window_loss = 0.0;
                window_steps = 0;
            }
        }
        if !val.is_empty() {
            let pred = predict_labels(&bundle, val)?;
            let f1 = macro_f1(&val_labels, &pred);
            rows.push(LogRow {
                step,
                epoch,
                loss: epoch_loss / epoch_steps.max(1) as f64,
                val_metric: Some(f1),
            });
            if best.as_ref().is_none_or(|b| f1 > b.0) {
                best = Some((f1, epoch, bundle.params.clone()));
            }
        }
    }
    let (best_val, best_epoch) = match best {
        Some((f1, epoch, params)) => {
            bundle.params = params;
            (Some(f1), epoch)
        }
        None => (None, cfg.epochs),
    };
    let pred = predict_labels(&bundle, train)?;
    let correct = pred.iter().zip(&train_labels).filter(|(a, b)| a == b).count();
    bundle.log = TrainLog {
        rows,
        best_epoch,
        best_val_metric: best_val,
        train_accuracy: correct as f64 / train.len() as f64,
    };
    Ok(bundle)
}
