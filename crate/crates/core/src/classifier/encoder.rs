use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::hex;
use crate::error::{Error, Result};
use crate::math;
use crate::nn::{Matrix, ParamId, ParamStore, Tape, Var};
use crate::textualizer::{TokenizerAsset, TOKEN_BUDGET};

use super::LoraConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pooling {
    /// Mean over all tokens.
    Mean,
    /// Hidden state of the final token.
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// Bidirectional self-attention, mean pooling.
    Bidirectional,
    /// Causal self-attention, last-token pooling.
    Causal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub architecture: Architecture,
    pub vocab_size: usize,
    pub max_len: usize,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn: usize,
    pub dropout: f32,
    pub pooling: Pooling,
    pub init_seed: u64,
}

impl EncoderConfig {
    pub fn compact(architecture: Architecture, vocab_size: usize) -> Self {
        Self {
            architecture,
            vocab_size,
            max_len: TOKEN_BUDGET,
            d_model: 32,
            heads: 2,
            layers: 2,
            ffn: 64,
            dropout: 0.1,
            pooling: match architecture {
                Architecture::Bidirectional => Pooling::Mean,
                Architecture::Causal => Pooling::Last,
            },
            init_seed: 2024,
        }
    }

    pub fn causal(&self) -> bool {
        self.architecture == Architecture::Causal
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.layers == 0 || self.ffn == 0 || self.vocab_size == 0 || self.max_len == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Initial encoder weights plus the tokenizer they were built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderAsset {
    pub asset_id: String,
    pub config: EncoderConfig,
    pub tokenizer_contract_id: String,
    pub params: ParamStore,
}

/// Value of a `d.ddd` numeral token.
fn numeral_value(text: &str) -> Option<f64> {
    let b = text.as_bytes();
    if b.len() == 5 && b[1] == b'.' && b.iter().enumerate().all(|(i, c)| i == 1 || c.is_ascii_digit()) {
        text.parse().ok()
    } else {
        None
    }
}

impl EncoderAsset {
    /// Deterministic compact encoder for `tokenizer`. Numeral tokens get
    /// embeddings that vary smoothly with the value they spell, positions get
    /// sinusoidal embeddings, everything else is Glorot / unit-normal.
    pub fn compact<T: TokenizerAsset + ?Sized>(tokenizer: &T, architecture: Architecture) -> Self {
        Self::with_config(tokenizer, EncoderConfig::compact(architecture, tokenizer.vocab_size()))
    }

    pub fn with_config<T: TokenizerAsset + ?Sized>(tokenizer: &T, config: EncoderConfig) -> Self {
        config.validate().expect("valid encoder configuration");
        let d = config.d_model;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let mut ps = ParamStore::new();
        let freqs: Vec<(f64, f64)> = (0..d)
            .map(|j| {
                let f = 0.5 * math::powf(16.0, j as f64 / (d - 1).max(1) as f64);
                (f, rng.random_range(0.0..core::f64::consts::TAU))
            })
            .collect();
        let tok = ps.add_normal("embeddings.token", config.vocab_size, d, 1.0, &mut rng);
        for id in 0..config.vocab_size {
            let Some(v) = tokenizer.token_text(id as u32).and_then(numeral_value) else {
                continue;
            };
            let row = ps.get_mut(tok).value.row_mut(id);
            for (x, (f, phi)) in row.iter_mut().zip(&freqs) {
                *x = (core::f64::consts::SQRT_2 * math::cos(core::f64::consts::PI * f * v + phi)) as f32;
            }
        }
        let pos = Matrix::from_fn(config.max_len, d, |p, j| {
            let rate = math::powf(10_000.0, -((j / 2 * 2) as f64) / d as f64);
            let a = p as f64 * rate;
            (if j % 2 == 0 { math::sin(a) } else { math::cos(a) }) as f32
        });
        ps.add("embeddings.position", pos, true);
        ps.add_const("embeddings.norm.gamma", 1, d, 1.0);
        ps.add_const("embeddings.norm.beta", 1, d, 0.0);
        for l in 0..config.layers {
            for w in ["q", "k", "v", "o"] {
                ps.add_glorot(&format!("layer{l}.attn.{w}.weight"), d, d, &mut rng);
                ps.add_const(&format!("layer{l}.attn.{w}.bias"), 1, d, 0.0);
            }
            ps.add_const(&format!("layer{l}.attn_norm.gamma"), 1, d, 1.0);
            ps.add_const(&format!("layer{l}.attn_norm.beta"), 1, d, 0.0);
            ps.add_glorot(&format!("layer{l}.ffn.in.weight"), d, config.ffn, &mut rng);
            ps.add_const(&format!("layer{l}.ffn.in.bias"), 1, config.ffn, 0.0);
            ps.add_glorot(&format!("layer{l}.ffn.out.weight"), config.ffn, d, &mut rng);
            ps.add_const(&format!("layer{l}.ffn.out.bias"), 1, d, 0.0);
            ps.add_const(&format!("layer{l}.ffn_norm.gamma"), 1, d, 1.0);
            ps.add_const(&format!("layer{l}.ffn_norm.beta"), 1, d, 0.0);
        }
        let name = match config.architecture {
            Architecture::Bidirectional => "compact-bidirectional",
            Architecture::Causal => "compact-causal",
        };
        let asset_id = format!("{name}-{}", &hex(&params_digest(&ps))[..16]);
        Self {
            asset_id,
            config,
            tokenizer_contract_id: String::from(tokenizer.contract_id()),
            params: ps,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }
}

/// sha256 over parameter names, shapes and values.
pub fn params_digest(ps: &ParamStore) -> [u8; 32] {
    let mut h = Sha256::new();
    for (_, p) in ps.iter() {
        h.update(p.name.as_bytes());
        h.update((p.value.rows as u64).to_le_bytes());
        h.update((p.value.cols as u64).to_le_bytes());
        for v in &p.value.data {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}

pub(crate) struct Lora {
    pub a: ParamId,
    pub b: ParamId,
}

pub(crate) struct LayerIds {
    w: [(ParamId, ParamId); 4],
    attn_norm: (ParamId, ParamId),
    ffn_in: (ParamId, ParamId),
    ffn_out: (ParamId, ParamId),
    ffn_norm: (ParamId, ParamId),
    lora_q: Option<Lora>,
    lora_v: Option<Lora>,
}

/// Parameter handles of an encoder with a classification head.
pub(crate) struct Network {
    pub config: EncoderConfig,
    tok: ParamId,
    pos: ParamId,
    emb_norm: (ParamId, ParamId),
    layers: Vec<LayerIds>,
    head: (ParamId, ParamId),
    lora_scale: f32,
    lora_dropout: f32,
}

fn id(ps: &ParamStore, name: &str) -> Result<ParamId> {
    ps.find(name)
        .ok_or_else(|| Error::Data(format!("model weights lack parameter `{name}`")))
}

fn pair(ps: &ParamStore, a: &str, b: &str) -> Result<(ParamId, ParamId)> {
    Ok((id(ps, a)?, id(ps, b)?))
}

pub(crate) const HEAD_WEIGHT: &str = "head.weight";
pub(crate) const HEAD_BIAS: &str = "head.bias";

/// Adds a fresh 2-way head to `ps`.
pub(crate) fn add_head(ps: &mut ParamStore, d: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4845_4144);
    ps.add_glorot(HEAD_WEIGHT, d, 2, &mut rng);
    ps.add_const(HEAD_BIAS, 1, 2, 0.0);
}

/// Adds zero-initialized-B adapters on the query and value projections.
pub(crate) fn add_lora(ps: &mut ParamStore, config: &EncoderConfig, lora: &LoraConfig, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4c4f_5241);
    let d = config.d_model;
    let bound = 1.0 / math::sqrtf(d as f32);
    for l in 0..config.layers {
        for w in ["q", "v"] {
            let a = Matrix::from_fn(d, lora.rank, |_, _| rng.random_range(-bound..bound));
            ps.add(format!("layer{l}.attn.{w}.lora_a"), a, false);
            ps.add(format!("layer{l}.attn.{w}.lora_b"), Matrix::zeros(lora.rank, d), false);
        }
    }
}

impl Network {
    pub fn resolve(ps: &ParamStore, config: &EncoderConfig, lora: Option<&LoraConfig>) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let proj = |w: &str| pair(ps, &format!("layer{l}.attn.{w}.weight"), &format!("layer{l}.attn.{w}.bias"));
            let adapter = |w: &str| -> Result<Option<Lora>> {
                if lora.is_none() {
                    return Ok(None);
                }
                Ok(Some(Lora {
                    a: id(ps, &format!("layer{l}.attn.{w}.lora_a"))?,
                    b: id(ps, &format!("layer{l}.attn.{w}.lora_b"))?,
                }))
            };
            layers.push(LayerIds {
                w: [proj("q")?, proj("k")?, proj("v")?, proj("o")?],
                attn_norm: pair(ps, &format!("layer{l}.attn_norm.gamma"), &format!("layer{l}.attn_norm.beta"))?,
                ffn_in: pair(ps, &format!("layer{l}.ffn.in.weight"), &format!("layer{l}.ffn.in.bias"))?,
                ffn_out: pair(ps, &format!("layer{l}.ffn.out.weight"), &format!("layer{l}.ffn.out.bias"))?,
                ffn_norm: pair(ps, &format!("layer{l}.ffn_norm.gamma"), &format!("layer{l}.ffn_norm.beta"))?,
                lora_q: adapter("q")?,
                lora_v: adapter("v")?,
            });
        }
        let vocab = ps.value(id(ps, "embeddings.token")?);
        if vocab.rows != config.vocab_size || vocab.cols != config.d_model {
            return Err(Error::Shape {
                expected: format!("({}, {})", config.vocab_size, config.d_model),
                got: format!("({}, {})", vocab.rows, vocab.cols),
            });
        }
        Ok(Self {
            config: config.clone(),
            tok: id(ps, "embeddings.token")?,
            pos: id(ps, "embeddings.position")?,
            emb_norm: pair(ps, "embeddings.norm.gamma", "embeddings.norm.beta")?,
            layers,
            head: pair(ps, HEAD_WEIGHT, HEAD_BIAS)?,
            lora_scale: lora.map_or(0.0, |l| l.alpha / l.rank as f32),
            lora_dropout: lora.map_or(0.0, |l| l.adapter_dropout),
        })
    }

    fn linear(&self, t: &mut Tape, x: Var, w: (ParamId, ParamId)) -> Var {
        let wv = t.param(w.0);
        let bv = t.param(w.1);
        let h = t.matmul(x, wv);
        t.add_row(h, bv)
    }

    fn adapted(&self, t: &mut Tape, x: Var, w: (ParamId, ParamId), lora: &Option<Lora>, rng: &mut Option<&mut ChaCha8Rng>) -> Var {
        let base = self.linear(t, x, w);
        let Some(l) = lora else { return base };
        let xin = match rng {
            Some(r) => t.dropout(x, self.lora_dropout, *r),
            None => x,
        };
        let a = t.param(l.a);
        let b = t.param(l.b);
        let low = t.matmul(xin, a);
        let delta = t.matmul(low, b);
        let delta = t.scale(delta, self.lora_scale);
        t.add(base, delta)
    }

    fn drop(&self, t: &mut Tape, x: Var, rng: &mut Option<&mut ChaCha8Rng>) -> Var {
        match rng {
            Some(r) => t.dropout(x, self.config.dropout, *r),
            None => x,
        }
    }

    /// Runs the encoder over `ids` (no padding). `rng` enables dropout.
    pub fn forward(&self, t: &mut Tape, ids: &[u32], mut rng: Option<&mut ChaCha8Rng>) -> Result<ForwardPass> {
        let n = ids.len();
        if n == 0 || n > self.config.max_len {
            return Err(Error::TokenBudget {
                tokens: n,
                budget: self.config.max_len,
            });
        }
        if let Some(bad) = ids.iter().find(|i| **i as usize >= self.config.vocab_size) {
            return Err(Error::Data(format!("token id {bad} outside vocabulary")));
        }
        let d = self.config.d_model;
        let dh = d / self.config.heads;
        let scale = 1.0 / math::sqrtf(dh as f32);
        let positions: Vec<u32> = (0..n as u32).collect();
        let tok = t.param(self.tok);
        let pos = t.param(self.pos);
        let e = t.gather(tok, ids);
        let p = t.gather(pos, &positions);
        let x0 = t.add(e, p);
        let (g, b) = (t.param(self.emb_norm.0), t.param(self.emb_norm.1));
        let x0 = t.layer_norm(x0, g, b);
        let mut x = self.drop(t, x0, &mut rng);
        let mut scores = Vec::with_capacity(self.config.layers * self.config.heads);
        for layer in &self.layers {
            let q = self.adapted(t, x, layer.w[0], &layer.lora_q, &mut rng);
            let k = self.linear(t, x, layer.w[1]);
            let v = self.adapted(t, x, layer.w[2], &layer.lora_v, &mut rng);
            let mut heads = Vec::with_capacity(self.config.heads);
            for h in 0..self.config.heads {
                let qh = t.slice_cols(q, h * dh, dh);
                let kh = t.slice_cols(k, h * dh, dh);
                let vh = t.slice_cols(v, h * dh, dh);
                let s = t.matmul_t(qh, kh);
                let s = t.scale(s, scale);
                scores.push(s);
                let a = t.softmax_rows(s, self.config.causal());
                heads.push(t.matmul(a, vh));
            }
            let o = if heads.len() == 1 { heads[0] } else { t.concat_cols(&heads) };
            let o = self.linear(t, o, layer.w[3]);
            let o = self.drop(t, o, &mut rng);
            let r = t.add(x, o);
            let (g, b) = (t.param(layer.attn_norm.0), t.param(layer.attn_norm.1));
            x = t.layer_norm(r, g, b);
            let f = self.linear(t, x, layer.ffn_in);
            let f = t.gelu(f);
            let f = self.linear(t, f, layer.ffn_out);
            let f = self.drop(t, f, &mut rng);
            let r = t.add(x, f);
            let (g, b) = (t.param(layer.ffn_norm.0), t.param(layer.ffn_norm.1));
            x = t.layer_norm(r, g, b);
        }
        let pooled = match self.config.pooling {
            Pooling::Mean => t.mean_rows(x),
            Pooling::Last => {
                let mut w = alloc::vec![0.0; n];
                w[n - 1] = 1.0;
                t.weighted_row_sum(x, &w)
            }
        };
        let logits = self.linear(t, pooled, self.head);
        Ok(ForwardPass { logits, scores })
    }
}

pub(crate) struct ForwardPass {
    pub logits: Var,
    /// Scaled pre-softmax attention scores, layer-major then head.
    pub scores: Vec<Var>,
}
