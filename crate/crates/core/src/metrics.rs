//! Binary detection metrics with ATTACK as the positive class.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Label;

/// Counts with ATTACK as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn from_pairs<I: IntoIterator<Item = (Label, Label)>>(truth_pred: I) -> Self {
        let mut cm = Self::default();
        for (t, p) in truth_pred {
            cm.record(t, p);
        }
        cm
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Attack, Label::Attack) => self.tp += 1,
            (Label::Attack, Label::Fault) => self.fn_ += 1,
            (Label::Fault, Label::Fault) => self.tn += 1,
            (Label::Fault, Label::Attack) => self.fp += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// All rates in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub detection_rate: f64,
    pub accuracy: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub specificity: f64,
    pub f1_macro: f64,
    pub confusion: ConfusionMatrix,
    /// Per-class quantities whose denominator was zero (reported as 0).
    pub undefined: Vec<String>,
}

fn ratio(num: u64, den: u64, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.into());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Metric suite of a confusion matrix.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::Data("confusion matrix is empty".into()));
    }
    let mut undefined = Vec::new();
    let u = &mut undefined;
    let recall_attack = ratio(cm.tp, cm.tp + cm.fn_, "recall ATTACK", u);
    let recall_fault = ratio(cm.tn, cm.tn + cm.fp, "recall FAULT", u);
    let precision_attack = ratio(cm.tp, cm.tp + cm.fp, "precision ATTACK", u);
    let precision_fault = ratio(cm.tn, cm.tn + cm.fn_, "precision FAULT", u);
    let accuracy = (cm.tp + cm.tn) as f64 / cm.total() as f64;
    let f1_macro = (f1(precision_attack, recall_attack) + f1(precision_fault, recall_fault)) / 2.0;
    Ok(MetricsReport {
        detection_rate: 100.0 * recall_attack,
        accuracy: 100.0 * accuracy,
        precision_macro: 100.0 * (precision_attack + precision_fault) / 2.0,
        recall_macro: 100.0 * (recall_attack + recall_fault) / 2.0,
        specificity: 100.0 * recall_fault,
        f1_macro: 100.0 * f1_macro,
        confusion: *cm,
        undefined,
    })
}

/// Macro F1 as a fraction in `[0, 1]`; 0 for an empty set.
pub fn macro_f1(truth: &[Label], predicted: &[Label]) -> f64 {
    let cm = ConfusionMatrix::from_pairs(truth.iter().copied().zip(predicted.iter().copied()));
    metrics(&cm).map_or(0.0, |m| m.f1_macro / 100.0)
}

/// Inference timing summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub cycles_at_60hz: f64,
    pub sample_count: usize,
    /// Mean of the tokenization stage alone, when measured.
    pub tokenize_mean_ms: Option<f64>,
    pub hardware_note: String,
}

/// Protection budget the detector has to fit into, in cycles.
pub const TRIP_BUDGET_CYCLES: (f64, f64) = (2.0, 3.0);

pub fn cycles_at_60hz(mean_ms: f64) -> f64 {
    mean_ms * 60.0 / 1000.0
}

/// Nearest-rank percentile of unsorted values, `q` in `(0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let rank = crate::math::ceil(q * v.len() as f64) as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

impl LatencyReport {
    pub fn from_samples_ms(samples: &[f64], hardware_note: impl Into<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("latency benchmark needs at least one sample".into()));
        }
        let mean_ms = samples.iter().sum::<f64>() / samples.len() as f64;
        Ok(Self {
            mean_ms,
            p95_ms: percentile(samples, 0.95).unwrap_or(mean_ms),
            cycles_at_60hz: cycles_at_60hz(mean_ms),
            sample_count: samples.len(),
            tokenize_mean_ms: None,
            hardware_note: hardware_note.into(),
        })
    }

    pub fn within_trip_budget(&self) -> bool {
        self.cycles_at_60hz <= TRIP_BUDGET_CYCLES.0
    }
}
