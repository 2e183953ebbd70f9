use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Matrix,
    pub trainable: bool,
    /// Excluded from weight decay (biases, norms, embeddings of positions).
    pub no_decay: bool,
}

/// Named parameter tensors of one model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix, no_decay: bool) -> ParamId {
        let name = name.into();
        assert!(self.find(&name).is_none(), "duplicate parameter {name}");
        self.params.push(Param {
            name,
            value,
            trainable: true,
            no_decay,
        });
        ParamId(self.params.len() - 1)
    }

    /// Normal(0, std) initialized weight.
    pub fn add_normal<R: Rng>(&mut self, name: &str, rows: usize, cols: usize, std: f32, rng: &mut R) -> ParamId {
        let normal = Normal::new(0.0f32, std).expect("finite std");
        let m = Matrix::from_fn(rows, cols, |_, _| normal.sample(rng));
        self.add(name, m, false)
    }

    /// Glorot-uniform weight for a `fan_in x fan_out` projection.
    pub fn add_glorot<R: Rng>(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> ParamId {
        let limit = math::sqrtf(6.0 / (fan_in + fan_out) as f32);
        let m = Matrix::from_fn(fan_in, fan_out, |_, _| rng.random_range(-limit..limit));
        self.add(name, m, false)
    }

    pub fn add_const(&mut self, name: &str, rows: usize, cols: usize, v: f32) -> ParamId {
        let mut m = Matrix::zeros(rows, cols);
        m.fill(v);
        self.add(name, m, true)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn freeze_all(&mut self) {
        self.params.iter_mut().for_each(|p| p.trainable = false);
    }

    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }
}

/// Gradient accumulator aligned with a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn for_store(store: &ParamStore) -> Self {
        Self {
            grads: (0..store.len()).map(|_| None).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub(crate) fn slot(&mut self, id: ParamId, rows: usize, cols: usize) -> &mut Matrix {
        if self.grads.len() <= id.0 {
            self.grads.resize_with(id.0 + 1, || None);
        }
        self.grads[id.0].get_or_insert_with(|| Matrix::zeros(rows, cols))
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Matrix) {
        self.slot(id, g.rows, g.cols).add_assign(g);
    }

    pub fn merge(&mut self, other: &Gradients) {
        for (i, g) in other.grads.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, s: f32) {
        for g in self.grads.iter_mut().flatten() {
            g.data.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn clear(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub cfg: AdamWConfig,
    step: u32,
    m: Vec<Option<Matrix>>,
    v: Vec<Option<Matrix>>,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig, store: &ParamStore) -> Self {
        Self {
            cfg,
            step: 0,
            m: (0..store.len()).map(|_| None).collect(),
            v: (0..store.len()).map(|_| None).collect(),
        }
    }

    pub fn steps(&self) -> u32 {
        self.step
    }

    /// One update with learning rate `lr` applied to every trainable parameter.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients, lr: f32) {
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - math::powif(c.beta1, self.step as i32);
        let bc2 = 1.0 - math::powif(c.beta2, self.step as i32);
        for (i, p) in store.params.iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            let Some(g) = grads.get(ParamId(i)) else { continue };
            let m = self.m[i].get_or_insert_with(|| Matrix::zeros(g.rows, g.cols));
            let v = self.v[i].get_or_insert_with(|| Matrix::zeros(g.rows, g.cols));
            let decay = if p.no_decay { 0.0 } else { lr * c.weight_decay };
            for k in 0..g.data.len() {
                let gk = g.data[k];
                m.data[k] = c.beta1 * m.data[k] + (1.0 - c.beta1) * gk;
                v.data[k] = c.beta2 * v.data[k] + (1.0 - c.beta2) * gk * gk;
                let mh = m.data[k] / bc1;
                let vh = v.data[k] / bc2;
                let w = &mut p.value.data[k];
                *w -= decay * *w;
                *w -= lr * mh / (math::sqrtf(vh) + c.eps);
            }
        }
    }
}
