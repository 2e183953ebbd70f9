//! Model bundles on disk.
//!
//! A bundle directory holds `bundle.json` (provenance and parameter layout),
//! `weights.safetensors` (every tensor, `f32`) and `train_log.csv`.
//! Baselines are a single `baseline.json`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use safetensors::tensor::{Dtype, TensorView};
use safetensors::SafeTensors;
use serde::{Deserialize, Serialize};
use tcdr_core::classifier::baselines::BaselineModel;
use tcdr_core::classifier::{EncoderConfig, LoraConfig, ModelBundle, TrainLog};
use tcdr_core::nn::{Matrix, ParamStore};
use tcdr_core::signal::Label;

use crate::error::{format_err, io_err, Result};

pub const META_FILE: &str = "bundle.json";
pub const WEIGHTS_FILE: &str = "weights.safetensors";
pub const LOG_FILE: &str = "train_log.csv";
pub const BASELINE_FILE: &str = "baseline.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    rows: usize,
    cols: usize,
    trainable: bool,
    no_decay: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct BundleMeta {
    format_version: u32,
    encoder_asset_id: String,
    encoder_config: EncoderConfig,
    lora: Option<LoraConfig>,
    tokenizer_contract_id: String,
    train_config_fingerprint: String,
    label_map: [Label; 2],
    log: TrainLog,
    base_parameter_count: usize,
    trainable_parameter_count: usize,
    params: Vec<ParamMeta>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

pub fn save_bundle(bundle: &ModelBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let params: Vec<ParamMeta> = bundle
        .params
        .iter()
        .map(|(_, p)| ParamMeta {
            name: p.name.clone(),
            rows: p.value.rows,
            cols: p.value.cols,
            trainable: p.trainable,
            no_decay: p.no_decay,
        })
        .collect();
    let meta = BundleMeta {
        format_version: FORMAT_VERSION,
        encoder_asset_id: bundle.encoder_asset_id.clone(),
        encoder_config: bundle.encoder_config.clone(),
        lora: bundle.lora,
        tokenizer_contract_id: bundle.tokenizer_contract_id.clone(),
        train_config_fingerprint: bundle.train_config_fingerprint.clone(),
        label_map: bundle.label_map,
        log: bundle.log.clone(),
        base_parameter_count: bundle.base_parameter_count,
        trainable_parameter_count: bundle.trainable_parameter_count,
        params,
    };
    let meta_path = dir.join(META_FILE);
    let json = serde_json::to_vec_pretty(&meta).map_err(|e| format_err(&meta_path, e.to_string()))?;
    write_file(&meta_path, &json)?;

    let weights_path = dir.join(WEIGHTS_FILE);
    let bytes: Vec<(String, Vec<u8>, Vec<usize>)> = bundle
        .params
        .iter()
        .map(|(_, p)| {
            let b = p.value.data.iter().flat_map(|v| v.to_le_bytes()).collect();
            (p.name.clone(), b, vec![p.value.rows, p.value.cols])
        })
        .collect();
    let views = bytes
        .iter()
        .map(|(n, b, shape)| {
            TensorView::new(Dtype::F32, shape.clone(), b)
                .map(|v| (n.clone(), v))
                .map_err(|e| format_err(&weights_path, e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let info: HashMap<String, String> = [
        ("encoder_asset_id".to_string(), bundle.encoder_asset_id.clone()),
        ("tokenizer_contract_id".to_string(), bundle.tokenizer_contract_id.clone()),
    ]
    .into();
    let blob = safetensors::serialize(views, &Some(info)).map_err(|e| format_err(&weights_path, e.to_string()))?;
    write_file(&weights_path, &blob)?;
    write_train_log(&bundle.log, &dir.join(LOG_FILE))
}

pub fn load_bundle(dir: &Path) -> Result<ModelBundle> {
    let meta_path = dir.join(META_FILE);
    let raw = fs::read(&meta_path).map_err(io_err(&meta_path))?;
    let meta: BundleMeta = serde_json::from_slice(&raw).map_err(|e| format_err(&meta_path, e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(format_err(&meta_path, format!("unsupported bundle version {}", meta.format_version)));
    }
    let weights_path = dir.join(WEIGHTS_FILE);
    let blob = fs::read(&weights_path).map_err(io_err(&weights_path))?;
    let st = SafeTensors::deserialize(&blob).map_err(|e| format_err(&weights_path, e.to_string()))?;
    let mut params = ParamStore::new();
    for p in &meta.params {
        let t = st
            .tensor(&p.name)
            .map_err(|e| format_err(&weights_path, format!("{}: {e}", p.name)))?;
        if t.dtype() != Dtype::F32 || t.shape() != [p.rows, p.cols] {
            return Err(format_err(&weights_path, format!("{}: unexpected dtype or shape", p.name)));
        }
        let data: Vec<f32> = t
            .data()
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let id = params.add(p.name.clone(), Matrix::from_vec(p.rows, p.cols, data), p.no_decay);
        params.set_trainable(id, p.trainable);
    }
    Ok(ModelBundle {
        encoder_asset_id: meta.encoder_asset_id,
        encoder_config: meta.encoder_config,
        lora: meta.lora,
        params,
        tokenizer_contract_id: meta.tokenizer_contract_id,
        train_config_fingerprint: meta.train_config_fingerprint,
        label_map: meta.label_map,
        log: meta.log,
        base_parameter_count: meta.base_parameter_count,
        trainable_parameter_count: meta.trainable_parameter_count,
    })
}

/// `step,epoch,loss,val_metric`; the metric is empty on non-epoch rows.
pub fn write_train_log(log: &TrainLog, path: &Path) -> Result<()> {
    let mut s = String::from("step,epoch,loss,val_metric\n");
    for r in &log.rows {
        let metric = r.val_metric.map(|m| format!("{m:?}")).unwrap_or_default();
        s.push_str(&format!("{},{},{:?},{}\n", r.step, r.epoch, r.loss, metric));
    }
    write_file(path, s.as_bytes())
}

pub fn save_baseline(model: &BaselineModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(BASELINE_FILE);
    let json = serde_json::to_vec(model).map_err(|e| format_err(&path, e.to_string()))?;
    write_file(&path, &json)
}

pub fn load_baseline(dir: &Path) -> Result<BaselineModel> {
    let path = dir.join(BASELINE_FILE);
    let raw = fs::read(&path).map_err(io_err(&path))?;
    serde_json::from_slice(&raw).map_err(|e| format_err(&path, e.to_string()))
}

/// A stored model of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    Encoder(Box<ModelBundle>),
    Baseline(Box<BaselineModel>),
}

pub fn load_model(dir: &Path) -> Result<StoredModel> {
    if dir.join(BASELINE_FILE).exists() {
        Ok(StoredModel::Baseline(Box::new(load_baseline(dir)?)))
    } else {
        Ok(StoredModel::Encoder(Box::new(load_bundle(dir)?)))
    }
}
