use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::macro_f1;
use crate::nn::{AdamW, AdamWConfig, Matrix, ParamStore, Tape, Var};
use crate::signal::{Label, CHANNELS, WINDOW_LEN, WINDOW_VALUES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeuralArch {
    Cnn,
    Lstm,
    Gru,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralParams {
    pub epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub weight_decay: f32,
    /// Recurrent units.
    pub hidden: usize,
    /// Filters per convolution block.
    pub filters: usize,
    pub kernel: usize,
}

impl Default for NeuralParams {
    fn default() -> Self {
        Self {
            epochs: 20,
            learning_rate: 3e-3,
            batch_size: 32,
            weight_decay: 1e-4,
            hidden: 64,
            filters: 16,
            kernel: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub arch: NeuralArch,
    pub hyper: NeuralParams,
    pub params: ParamStore,
}

fn build(arch: NeuralArch, h: &NeuralParams, rng: &mut ChaCha8Rng) -> ParamStore {
    let mut ps = ParamStore::new();
    match arch {
        NeuralArch::Logistic => {
            ps.add_glorot("out.weight", WINDOW_VALUES, 2, rng);
            ps.add_const("out.bias", 1, 2, 0.0);
        }
        NeuralArch::Cnn => {
            ps.add_glorot("conv1.weight", h.kernel * CHANNELS, h.filters, rng);
            ps.add_const("conv1.bias", 1, h.filters, 0.0);
            ps.add_glorot("conv2.weight", h.kernel * h.filters, h.filters, rng);
            ps.add_const("conv2.bias", 1, h.filters, 0.0);
            ps.add_glorot("out.weight", h.filters, 2, rng);
            ps.add_const("out.bias", 1, 2, 0.0);
        }
        NeuralArch::Gru => {
            for g in ["z", "r", "n"] {
                ps.add_glorot(&format!("gru.{g}.w"), CHANNELS, h.hidden, rng);
                ps.add_glorot(&format!("gru.{g}.u"), h.hidden, h.hidden, rng);
                ps.add_const(&format!("gru.{g}.b"), 1, h.hidden, 0.0);
            }
            ps.add_glorot("out.weight", h.hidden, 2, rng);
            ps.add_const("out.bias", 1, 2, 0.0);
        }
        NeuralArch::Lstm => {
            ps.add_glorot("lstm.w", CHANNELS, 4 * h.hidden, rng);
            ps.add_glorot("lstm.u", h.hidden, 4 * h.hidden, rng);
            let mut b = Matrix::zeros(1, 4 * h.hidden);
            // forget-gate bias of one
            for c in h.hidden..2 * h.hidden {
                b.data[c] = 1.0;
            }
            ps.add("lstm.b", b, true);
            ps.add_glorot("out.weight", h.hidden, 2, rng);
            ps.add_const("out.bias", 1, 2, 0.0);
        }
    }
    ps
}

fn p(t: &mut Tape, ps: &ParamStore, name: &str) -> Var {
    t.param(ps.find(name).expect("baseline parameter"))
}

fn affine(t: &mut Tape, ps: &ParamStore, x: Var, w: &str, b: &str) -> Var {
    let wv = p(t, ps, w);
    let bv = p(t, ps, b);
    let h = t.matmul(x, wv);
    t.add_row(h, bv)
}

/// Logits (`batch x 2`) for a batch of normalized windows (each 192 values, time-major).
fn forward(t: &mut Tape, m: &NeuralModel, batch: &[&[f32]]) -> Var {
    let ps = &m.params;
    let h = &m.hyper;
    match m.arch {
        NeuralArch::Logistic => {
            let data: Vec<f32> = batch.iter().flat_map(|x| x.iter().copied()).collect();
            let x = t.input(Matrix::from_vec(batch.len(), WINDOW_VALUES, data));
            affine(t, ps, x, "out.weight", "out.bias")
        }
        NeuralArch::Cnn => {
            let rows: Vec<Var> = batch
                .iter()
                .map(|x| {
                    let xi = t.input(Matrix::from_vec(WINDOW_LEN, CHANNELS, x.to_vec()));
                    let u = t.unfold(xi, h.kernel);
                    let c1 = affine(t, ps, u, "conv1.weight", "conv1.bias");
                    let c1 = t.relu(c1);
                    let u2 = t.unfold(c1, h.kernel);
                    let c2 = affine(t, ps, u2, "conv2.weight", "conv2.bias");
                    let c2 = t.relu(c2);
                    t.mean_rows(c2)
                })
                .collect();
            let pooled = t.concat_rows(&rows);
            affine(t, ps, pooled, "out.weight", "out.bias")
        }
        NeuralArch::Gru => {
            let b = batch.len();
            let mut hs = t.input(Matrix::zeros(b, h.hidden));
            for step in 0..WINDOW_LEN {
                let x = t.input(step_inputs(batch, step));
                let gate = |t: &mut Tape, g: &str, hin: Var| {
                    let xw = affine(t, ps, x, &format!("gru.{g}.w"), &format!("gru.{g}.b"));
                    let u = p(t, ps, &format!("gru.{g}.u"));
                    let hu = t.matmul(hin, u);
                    t.add(xw, hu)
                };
                let z = gate(t, "z", hs);
                let z = t.sigmoid(z);
                let r = gate(t, "r", hs);
                let r = t.sigmoid(r);
                let rh = t.mul(r, hs);
                let n = gate(t, "n", rh);
                let n = t.tanh(n);
                let keep = t.mul(z, hs);
                let zc = t.one_minus(z);
                let new = t.mul(zc, n);
                hs = t.add(new, keep);
            }
            affine(t, ps, hs, "out.weight", "out.bias")
        }
        NeuralArch::Lstm => {
            let b = batch.len();
            let hd = h.hidden;
            let mut hs = t.input(Matrix::zeros(b, hd));
            let mut cs = t.input(Matrix::zeros(b, hd));
            for step in 0..WINDOW_LEN {
                let x = t.input(step_inputs(batch, step));
                let xw = affine(t, ps, x, "lstm.w", "lstm.b");
                let u = p(t, ps, "lstm.u");
                let hu = t.matmul(hs, u);
                let g = t.add(xw, hu);
                let i = t.slice_cols(g, 0, hd);
                let i = t.sigmoid(i);
                let f = t.slice_cols(g, hd, hd);
                let f = t.sigmoid(f);
                let c = t.slice_cols(g, 2 * hd, hd);
                let c = t.tanh(c);
                let o = t.slice_cols(g, 3 * hd, hd);
                let o = t.sigmoid(o);
                let fc = t.mul(f, cs);
                let ic = t.mul(i, c);
                cs = t.add(fc, ic);
                let tc = t.tanh(cs);
                hs = t.mul(o, tc);
            }
            affine(t, ps, hs, "out.weight", "out.bias")
        }
    }
}

fn step_inputs(batch: &[&[f32]], step: usize) -> Matrix {
    let mut m = Matrix::zeros(batch.len(), CHANNELS);
    for (r, x) in batch.iter().enumerate() {
        m.row_mut(r).copy_from_slice(&x[step * CHANNELS..(step + 1) * CHANNELS]);
    }
    m
}

impl NeuralModel {
    /// ATTACK probabilities for normalized windows.
    pub fn predict_proba(&self, xs: &[&[f32]]) -> Vec<f64> {
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(256) {
            let mut t = Tape::inference(&self.params);
            let logits = forward(&mut t, self, chunk);
            let l = t.value(logits);
            for r in 0..l.rows {
                let z = (l.get(r, 1) - l.get(r, 0)) as f64;
                out.push(1.0 / (1.0 + crate::math::exp(-z)));
            }
        }
        out
    }
}

pub(crate) fn fit(
    arch: NeuralArch,
    hyper: &NeuralParams,
    x: &[Vec<f32>],
    y: &[Label],
    vx: &[Vec<f32>],
    vy: &[Label],
    seed: u64,
) -> Result<NeuralModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = NeuralModel {
        arch,
        hyper: hyper.clone(),
        params: build(arch, hyper, &mut rng),
    };
    let mut opt = AdamW::new(
        AdamWConfig {
            learning_rate: hyper.learning_rate,
            weight_decay: hyper.weight_decay,
            ..AdamWConfig::default()
        },
        &model.params,
    );
    let targets: Vec<usize> = y.iter().map(|l| l.class_index()).collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut best: Option<(f64, ParamStore)> = None;
    for _ in 0..hyper.epochs {
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i as u64) as usize;
            order.swap(i, j);
        }
        for batch in order.chunks(hyper.batch_size) {
            let xs: Vec<&[f32]> = batch.iter().map(|k| x[*k].as_slice()).collect();
            let ts: Vec<usize> = batch.iter().map(|k| targets[*k]).collect();
            let grads = {
                let mut t = Tape::new(&model.params);
                let logits = forward(&mut t, &model, &xs);
                let loss = t.cross_entropy(logits, &ts);
                t.backward(loss)
            };
            opt.step(&mut model.params, &grads, hyper.learning_rate);
        }
        if !vx.is_empty() {
            let refs: Vec<&[f32]> = vx.iter().map(|v| v.as_slice()).collect();
            let pred: Vec<Label> = model
                .predict_proba(&refs)
                .into_iter()
                .map(|p| if p >= 0.5 { Label::Attack } else { Label::Fault })
                .collect();
            let f1 = macro_f1(vy, &pred);
            if best.as_ref().is_none_or(|b| f1 > b.0) {
                best = Some((f1, model.params.clone()));
            }
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(model)
}
