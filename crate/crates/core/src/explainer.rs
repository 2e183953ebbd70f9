//! Attention-based explanations projected onto the measurement grid.
//!
//! Token importance is the attention mass a token receives, averaged over
//! query rows, heads and layers. Importance of the numeral tokens is then
//! averaged per `(time, channel)` cell.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifier::ModelBundle;
use crate::error::{Error, Result};
use crate::signal::{CHANNELS, WINDOW_LEN};
use crate::textualizer::{CellAlignment, TokenizedSample};

const ROW_TOLERANCE: f64 = 1e-6;

/// Row-stochastic attention matrices indexed `[layer][head][query][key]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTensor {
    maps: Vec<Vec<Vec<Vec<f64>>>>,
    n_tokens: usize,
}

impl AttentionTensor {
    /// Validates shape, range and row sums.
    pub fn new(maps: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let n = maps
            .first()
            .and_then(|l| l.first())
            .map_or(0, |h| h.len());
        if n == 0 {
            return Err(Error::InvalidArgument("attention tensor is empty".into()));
        }
        let heads = maps[0].len();
        for (l, layer) in maps.iter().enumerate() {
            if layer.len() != heads {
                return Err(Error::Shape {
                    expected: format!("{heads} heads"),
                    got: format!("{} heads in layer {l}", layer.len()),
                });
            }
            for (h, m) in layer.iter().enumerate() {
                if m.len() != n || m.iter().any(|r| r.len() != n) {
                    return Err(Error::Shape {
                        expected: format!("{n}x{n}"),
                        got: format!("ragged matrix at layer {l} head {h}"),
                    });
                }
                for (i, row) in m.iter().enumerate() {
                    if row.iter().any(|a| !(0.0..=1.0).contains(a)) {
                        return Err(Error::OutOfRange {
                            what: "attention weight",
                            detail: format!("layer {l} head {h} row {i}"),
                        });
                    }
                    let s: f64 = row.iter().sum();
                    if (s - 1.0).abs() > ROW_TOLERANCE {
                        return Err(Error::OutOfRange {
                            what: "attention row sum",
                            detail: format!("{s} at layer {l} head {h} row {i}"),
                        });
                    }
                }
            }
        }
        Ok(Self { maps, n_tokens: n })
    }

    /// Softmax of raw scores, `[layer][head]` square matrices.
    pub fn from_logits(logits: &[Vec<Vec<Vec<f64>>>], causal: bool) -> Result<Self> {
        let maps = logits
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|m| {
                        let rows = m.len();
                        let cols = m.first().map_or(0, |r| r.len());
                        let mut out = Vec::with_capacity(rows);
                        for (r, row) in m.iter().enumerate() {
                            let limit = if causal { (r + 1).min(cols) } else { cols };
                            let max = row[..limit].iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v));
                            let mut e: Vec<f64> = (0..row.len())
                                .map(|c| if c < limit { crate::math::exp(row[c] - max) } else { 0.0 })
                                .collect();
                            let s: f64 = e.iter().sum();
                            e.iter_mut().for_each(|v| *v /= s);
                            out.push(e);
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        Self::new(maps)
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn layers(&self) -> usize {
        self.maps.len()
    }

    pub fn heads(&self) -> usize {
        self.maps[0].len()
    }

    pub fn matrix(&self, layer: usize, head: usize) -> &[Vec<f64>] {
        &self.maps[layer][head]
    }
}

/// Attention matrices of `model` for the unpadded tokens of `sample`.
pub fn extract_attention(model: &ModelBundle, sample: &TokenizedSample) -> Result<AttentionTensor> {
    AttentionTensor::new(model.attention(sample)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Column means: mass a token receives from all queries.
    #[default]
    Received,
    /// Row mass a token sends to unmasked tokens.
    Given,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ImportanceConfig {
    pub aggregation: Aggregation,
    /// Layers to average; `None` for all.
    pub layers: Option<Vec<usize>>,
}

impl ImportanceConfig {
    pub fn aggregation_id(&self) -> String {
        let base = match self.aggregation {
            Aggregation::Received => "attention-received",
            Aggregation::Given => "attention-given",
        };
        match &self.layers {
            None => format!("{base}/mean-heads/mean-layers"),
            Some(ls) => {
                let list: Vec<String> = ls.iter().map(|l| format!("{l}")).collect();
                format!("{base}/mean-heads/layers-{}", list.join("+"))
            }
        }
    }
}

/// Per-token importance over the tensor's tokens, max-normalized.
///
/// `mask[j]` is `true` for tokens that may receive importance; all other
/// positions score exactly zero.
pub fn token_importance(t: &AttentionTensor, mask: &[bool], config: &ImportanceConfig) -> Result<Vec<f64>> {
    let n = t.n_tokens();
    if mask.len() != n {
        return Err(Error::Shape {
            expected: format!("{n} mask entries"),
            got: format!("{}", mask.len()),
        });
    }
    if !mask.iter().any(|m| *m) {
        return Err(Error::InvalidArgument("every token is masked".into()));
    }
    let layers: Vec<usize> = match &config.layers {
        None => (0..t.layers()).collect(),
        Some(ls) => {
            if ls.is_empty() {
                return Err(Error::Config("empty layer selection".into()));
            }
            if let Some(bad) = ls.iter().find(|l| **l >= t.layers()) {
                return Err(Error::Config(format!("layer {bad} of {}", t.layers())));
            }
            ls.clone()
        }
    };
    let mut scores = vec![0.0f64; n];
    for &l in &layers {
        for h in 0..t.heads() {
            let a = t.matrix(l, h);
            for (j, s) in scores.iter_mut().enumerate() {
                if !mask[j] {
                    continue;
                }
                *s += match config.aggregation {
                    Aggregation::Received => a.iter().map(|row| row[j]).sum::<f64>() / n as f64,
                    Aggregation::Given => {
                        let kept = mask.iter().filter(|m| **m).count();
                        a[j].iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| v).sum::<f64>() / kept as f64
                    }
                };
            }
        }
    }
    let denom = (layers.len() * t.heads()) as f64;
    scores.iter_mut().for_each(|s| *s /= denom);
    let max = scores.iter().fold(0.0f64, |a, b| a.max(*b));
    if max > 0.0 {
        scores.iter_mut().for_each(|s| *s /= max);
    }
    Ok(scores)
}

/// Tokens that carry text: excludes special tokens (empty offsets) and padding.
pub fn content_mask(sample: &TokenizedSample) -> Vec<bool> {
    sample
        .token_offsets
        .iter()
        .zip(&sample.attention_mask)
        .map(|((s, e), m)| *m && s < e)
        .collect()
}

/// Per-cell importance over the `(32, 6)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    /// `[time][channel]`, normalized to max 1 when any score is positive.
    pub cell_scores: Vec<[f64; CHANNELS]>,
    /// Importance per token of the full (padded) sample.
    pub token_scores: Vec<f64>,
    pub aggregation_id: String,
    /// Tokens mapped to each cell.
    pub token_counts: Vec<[usize; CHANNELS]>,
    /// `(time, channel)` cells no token maps to.
    pub uncovered: Vec<(usize, usize)>,
    /// Largest per-cell mean before normalization (0 for an empty map).
    pub normalizer: f64,
}

impl AttentionMap {
    /// Cell with the highest score, first in time-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut top = f64::NEG_INFINITY;
        for (t, row) in self.cell_scores.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if *v > top {
                    top = *v;
                    best = (t, c);
                }
            }
        }
        best
    }

    /// Cells at or above the `q`-quantile of scores, e.g. `q = 0.9` for the top decile.
    pub fn top_cells(&self, q: f64) -> Vec<(usize, usize)> {
        let mut all: Vec<f64> = self.cell_scores.iter().flatten().copied().collect();
        all.sort_by(|a, b| b.total_cmp(a));
        let keep = crate::math::ceil((1.0 - q) * all.len() as f64).max(1.0) as usize;
        let cut = all[keep.min(all.len()) - 1];
        let mut out = Vec::new();
        for (t, row) in self.cell_scores.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if *v >= cut && *v > 0.0 {
                    out.push((t, c));
                }
            }
        }
        out
    }

    /// Σ cell_score · token_count · normalizer, which equals the summed score of aligned tokens.
    pub fn conserved_mass(&self) -> f64 {
        self.cell_scores
            .iter()
            .zip(&self.token_counts)
            .flat_map(|(s, n)| s.iter().zip(n).map(|(a, b)| a * *b as f64))
            .sum::<f64>()
            * self.normalizer
    }
}

/// Averages token scores per cell.
pub fn project_to_cells(token_scores: &[f64], alignment: &CellAlignment, aggregation_id: &str) -> Result<AttentionMap> {
    if token_scores.len() != alignment.len() {
        return Err(Error::Shape {
            expected: format!("{} token scores", alignment.len()),
            got: format!("{}", token_scores.len()),
        });
    }
    let mut sums = vec![[0.0f64; CHANNELS]; WINDOW_LEN];
    let mut counts = vec![[0usize; CHANNELS]; WINDOW_LEN];
    for (s, cell) in token_scores.iter().zip(alignment) {
        if let Some((t, c)) = *cell {
            if t >= WINDOW_LEN || c >= CHANNELS {
                return Err(Error::OutOfRange {
                    what: "aligned cell",
                    detail: format!("({t}, {c})"),
                });
            }
            if !s.is_finite() || *s < 0.0 {
                return Err(Error::NonFinite(format!("token score {s}")));
            }
            sums[t][c] += s;
            counts[t][c] += 1;
        }
    }
    let mut uncovered = Vec::new();
    let mut cells = vec![[0.0f64; CHANNELS]; WINDOW_LEN];
    for t in 0..WINDOW_LEN {
        for c in 0..CHANNELS {
            if counts[t][c] == 0 {
                uncovered.push((t, c));
            } else {
                cells[t][c] = sums[t][c] / counts[t][c] as f64;
            }
        }
    }
    let max = cells.iter().flatten().fold(0.0f64, |a, b| a.max(*b));
    if max > 0.0 {
        cells.iter_mut().flatten().for_each(|v| *v /= max);
    }
    Ok(AttentionMap {
        cell_scores: cells,
        token_scores: token_scores.to_vec(),
        aggregation_id: aggregation_id.into(),
        token_counts: counts,
        uncovered,
        normalizer: max,
    })
}

/// Attention map of one sample: extraction, importance over content tokens,
/// and projection onto the cells of `alignment`.
pub fn explain(
    model: &ModelBundle,
    sample: &TokenizedSample,
    alignment: &CellAlignment,
    config: &ImportanceConfig,
) -> Result<AttentionMap> {
    if alignment.len() != sample.len() {
        return Err(Error::Shape {
            expected: format!("{} aligned tokens", sample.len()),
            got: format!("{}", alignment.len()),
        });
    }
    let tensor = extract_attention(model, sample)?;
    let positions: Vec<usize> = (0..sample.len()).filter(|i| sample.attention_mask[*i]).collect();
    let full_mask = content_mask(sample);
    let mask: Vec<bool> = positions.iter().map(|p| full_mask[*p]).collect();
    let active = token_importance(&tensor, &mask, config)?;
    let mut scores = vec![0.0; sample.len()];
    for (p, s) in positions.iter().zip(active) {
        scores[*p] = s;
    }
    project_to_cells(&scores, alignment, &config.aggregation_id())
}
