//! Non-language-model detectors trained on raw numeric windows.
//!
//! Every baseline sees the same per-window min-max normalization as the
//! prompts. Sequence models read the `(32, 6)` matrix time step by time step;
//! tabular models read the time-major 192-vector.

mod classic;
mod neural;
mod trees;

pub use classic::{GaussianNb, Knn, RffSvm, SvmParams};
pub use neural::{NeuralArch, NeuralModel, NeuralParams};
pub use trees::{BoostParams, Tree};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Label, MeasurementWindow, CHANNELS, WINDOW_LEN, WINDOW_VALUES};
use crate::textualizer::normalize;

use super::Prediction;
use trees::{fit_boosted, fit_tree, Binner, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BaselineKind {
    Cnn,
    Lstm,
    Gru,
    RandomForest,
    DecisionTree,
    Svm,
    Xgboost,
    LogisticRegression,
    Knn,
    NaiveBayes,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 10] = [
        BaselineKind::Cnn,
        BaselineKind::Lstm,
        BaselineKind::Gru,
        BaselineKind::RandomForest,
        BaselineKind::DecisionTree,
        BaselineKind::Svm,
        BaselineKind::Xgboost,
        BaselineKind::LogisticRegression,
        BaselineKind::Knn,
        BaselineKind::NaiveBayes,
    ];

    pub fn code(self) -> &'static str {
        match self {
            BaselineKind::Cnn => "CNN",
            BaselineKind::Lstm => "LSTM",
            BaselineKind::Gru => "GRU",
            BaselineKind::RandomForest => "RANDOM_FOREST",
            BaselineKind::DecisionTree => "DECISION_TREE",
            BaselineKind::Svm => "SVM",
            BaselineKind::Xgboost => "XGBOOST",
            BaselineKind::LogisticRegression => "LOGISTIC_REGRESSION",
            BaselineKind::Knn => "KNN",
            BaselineKind::NaiveBayes => "NAIVE_BAYES",
        }
    }

    /// Whether the model consumes the time-major matrix rather than a flat vector.
    pub fn is_sequence(self) -> bool {
        matches!(self, BaselineKind::Cnn | BaselineKind::Lstm | BaselineKind::Gru)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: alloc::string::String = s
            .trim()
            .chars()
            .map(|c| if c == '-' || c == ' ' { '_' } else { c.to_ascii_uppercase() })
            .collect();
        let kind = match norm.as_str() {
            "CNN" => BaselineKind::Cnn,
            "LSTM" => BaselineKind::Lstm,
            "GRU" => BaselineKind::Gru,
            "RANDOM_FOREST" | "RF" => BaselineKind::RandomForest,
            "DECISION_TREE" | "DT" => BaselineKind::DecisionTree,
            "SVM" => BaselineKind::Svm,
            "XGBOOST" | "GBT" => BaselineKind::Xgboost,
            "LOGISTIC_REGRESSION" | "LOGREG" => BaselineKind::LogisticRegression,
            "KNN" => BaselineKind::Knn,
            "NAIVE_BAYES" | "NB" => BaselineKind::NaiveBayes,
            _ => return Err(Error::Config(format!("unknown baseline `{s}`"))),
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub trees: usize,
    /// Features tried per split; `None` means `sqrt(192)` rounded.
    pub max_features: Option<usize>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            trees: 100,
            max_features: None,
            max_depth: 32,
            min_samples_leaf: 1,
        }
    }
}

/// Hyperparameters of every baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub sequence: NeuralParams,
    pub logistic: NeuralParams,
    pub tree_max_depth: usize,
    pub tree_min_samples_leaf: usize,
    pub max_bins: usize,
    pub forest: ForestParams,
    pub boost: BoostParams,
    pub knn_k: usize,
    pub nb_var_smoothing: f64,
    pub svm: SvmParams,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            sequence: NeuralParams::default(),
            logistic: NeuralParams {
                epochs: 60,
                learning_rate: 1e-2,
                batch_size: 32,
                weight_decay: 1e-4,
                ..NeuralParams::default()
            },
            tree_max_depth: 32,
            tree_min_samples_leaf: 1,
            max_bins: 64,
            forest: ForestParams::default(),
            boost: BoostParams::default(),
            knn_k: 5,
            nb_var_smoothing: 1e-9,
            svm: SvmParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fitted {
    Neural(NeuralModel),
    Tree(Tree),
    Forest(Vec<Tree>),
    Boosted(Vec<Tree>),
    Knn(Knn),
    NaiveBayes(GaussianNb),
    Svm(RffSvm),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputShape {
    TimeMajor { steps: usize, channels: usize },
    Flat { len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub config: BaselineConfig,
    pub input_shape: InputShape,
    pub seed: u64,
    pub fitted: Fitted,
}

/// Normalized, time-major `f32` features of a window.
pub fn window_features(w: &MeasurementWindow) -> Vec<f32> {
    normalize(w).flat().into_iter().map(|v| v as f32).collect()
}

fn targets(ws: &[MeasurementWindow]) -> Vec<f64> {
    ws.iter().map(|w| w.label.class_index() as f64).collect()
}

/// Trains one baseline. `val` steers epoch selection of the neural models
/// and is otherwise unused.
pub fn train_baseline(
    kind: BaselineKind,
    train: &[MeasurementWindow],
    val: &[MeasurementWindow],
    config: &BaselineConfig,
    seed: u64,
) -> Result<BaselineModel> {
    let classes: BTreeSet<Label> = train.iter().map(|w| w.label).collect();
    if classes.len() < 2 {
        return Err(Error::Data(format!(
            "{kind} needs both classes in training, got {} sample(s)",
            train.len()
        )));
    }
    let x: Vec<Vec<f32>> = train.iter().map(window_features).collect();
    let y = targets(train);
    let fitted = match kind {
        BaselineKind::Cnn | BaselineKind::Lstm | BaselineKind::Gru | BaselineKind::LogisticRegression => {
            let (arch, hyper) = match kind {
                BaselineKind::Cnn => (NeuralArch::Cnn, &config.sequence),
                BaselineKind::Lstm => (NeuralArch::Lstm, &config.sequence),
                BaselineKind::Gru => (NeuralArch::Gru, &config.sequence),
                _ => (NeuralArch::Logistic, &config.logistic),
            };
            let labels: Vec<Label> = train.iter().map(|w| w.label).collect();
            let vx: Vec<Vec<f32>> = val.iter().map(window_features).collect();
            let vy: Vec<Label> = val.iter().map(|w| w.label).collect();
            Fitted::Neural(neural::fit(arch, hyper, &x, &labels, &vx, &vy, seed)?)
        }
        BaselineKind::DecisionTree => {
            let binner = Binner::fit(&x, config.max_bins);
            let bins = binner.transform(&x);
            let mut idx: Vec<usize> = (0..x.len()).collect();
            let params = TreeParams {
                max_depth: config.tree_max_depth,
                min_samples_leaf: config.tree_min_samples_leaf,
                max_features: None,
            };
            Fitted::Tree(fit_tree(&binner, &bins, &y, &mut idx, params, seed))
        }
        BaselineKind::RandomForest => {
            use rand::{Rng, SeedableRng};
            let binner = Binner::fit(&x, config.max_bins);
            let bins = binner.transform(&x);
            let f = &config.forest;
            let params = TreeParams {
                max_depth: f.max_depth,
                min_samples_leaf: f.min_samples_leaf,
                max_features: Some(
                    f.max_features
                        .unwrap_or(crate::math::round(crate::math::sqrt(WINDOW_VALUES as f64)) as usize),
                ),
            };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let trees = (0..f.trees)
                .map(|t| {
                    let mut idx: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..x.len() as u64) as usize).collect();
                    fit_tree(&binner, &bins, &y, &mut idx, params, seed.wrapping_add(t as u64 + 1))
                })
                .collect();
            Fitted::Forest(trees)
        }
        BaselineKind::Xgboost => {
            let binner = Binner::fit(&x, config.boost.max_bins);
            let bins = binner.transform(&x);
            Fitted::Boosted(fit_boosted(&binner, &bins, &x, &y, &config.boost))
        }
        BaselineKind::Knn => Fitted::Knn(Knn::fit(config.knn_k, &x, &y)),
        BaselineKind::NaiveBayes => Fitted::NaiveBayes(GaussianNb::fit(&x, &y, config.nb_var_smoothing)),
        BaselineKind::Svm => Fitted::Svm(RffSvm::fit(&x, &y, &config.svm, seed)),
    };
    Ok(BaselineModel {
        kind,
        config: config.clone(),
        input_shape: if kind.is_sequence() {
            InputShape::TimeMajor {
                steps: WINDOW_LEN,
                channels: CHANNELS,
            }
        } else {
            InputShape::Flat { len: WINDOW_VALUES }
        },
        seed,
        fitted,
    })
}

impl BaselineModel {
    /// ATTACK probability (a score in `[0, 1]`) per window.
    pub fn predict_proba(&self, windows: &[MeasurementWindow]) -> Vec<f64> {
        let x: Vec<Vec<f32>> = windows.iter().map(window_features).collect();
        match &self.fitted {
            Fitted::Neural(m) => {
                let refs: Vec<&[f32]> = x.iter().map(|v| v.as_slice()).collect();
                m.predict_proba(&refs)
            }
            Fitted::Tree(t) => x.iter().map(|v| t.predict(v)).collect(),
            Fitted::Forest(ts) => x
                .iter()
                .map(|v| ts.iter().map(|t| t.predict(v)).sum::<f64>() / ts.len().max(1) as f64)
                .collect(),
            Fitted::Boosted(ts) => x
                .iter()
                .map(|v| {
                    let m: f64 = ts.iter().map(|t| t.predict(v)).sum();
                    1.0 / (1.0 + crate::math::exp(-m))
                })
                .collect(),
            Fitted::Knn(k) => x.iter().map(|v| k.predict_proba(v)).collect(),
            Fitted::NaiveBayes(nb) => x.iter().map(|v| nb.predict_proba(v)).collect(),
            Fitted::Svm(s) => x
                .iter()
                .map(|v| 1.0 / (1.0 + crate::math::exp(-2.0 * s.margin(v))))
                .collect(),
        }
    }

    pub fn predict(&self, windows: &[MeasurementWindow]) -> Vec<Prediction> {
        self.predict_proba(windows)
            .into_iter()
            .map(Prediction::from_probability)
            .collect()
    }
}
