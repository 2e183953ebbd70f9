use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::math;

fn sq(x: f64) -> f64 {
    x * x
}

/// k-nearest neighbours by Euclidean distance; probability = attack share of the k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    x: Vec<Vec<f32>>,
    y: Vec<f64>,
}

impl Knn {
    pub(crate) fn fit(k: usize, x: &[Vec<f32>], y: &[f64]) -> Self {
        Self {
            k: k.max(1).min(x.len().max(1)),
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    pub fn predict_proba(&self, q: &[f32]) -> f64 {
        let mut best: Vec<(f32, usize)> = Vec::with_capacity(self.k + 1);
        for (i, r) in self.x.iter().enumerate() {
            let d: f32 = r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() < self.k || d < best[best.len() - 1].0 {
                let pos = best.partition_point(|(bd, bi)| (*bd, *bi) < (d, i));
                best.insert(pos, (d, i));
                best.truncate(self.k);
            }
        }
        best.iter().map(|(_, i)| self.y[*i]).sum::<f64>() / best.len().max(1) as f64
    }
}

/// Gaussian naive Bayes with variance smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    log_prior: [f64; 2],
    mean: [Vec<f64>; 2],
    var: [Vec<f64>; 2],
}

impl GaussianNb {
    pub(crate) fn fit(x: &[Vec<f32>], y: &[f64], var_smoothing: f64) -> Self {
        let d = x.first().map_or(0, |r| r.len());
        let mut n = [0.0f64; 2];
        let mut mean = [vec![0.0; d], vec![0.0; d]];
        let mut var = [vec![0.0; d], vec![0.0; d]];
        for (r, yi) in x.iter().zip(y) {
            let c = usize::from(*yi > 0.5);
            n[c] += 1.0;
            for (m, v) in mean[c].iter_mut().zip(r) {
                *m += *v as f64;
            }
        }
        for c in 0..2 {
            mean[c].iter_mut().for_each(|m| *m /= n[c].max(1.0));
        }
        for (r, yi) in x.iter().zip(y) {
            let c = usize::from(*yi > 0.5);
            for j in 0..d {
                let e = r[j] as f64 - mean[c][j];
                var[c][j] += e * e;
            }
        }
        let max_var = (0..d)
            .map(|j| {
                let all_mean = x.iter().map(|r| r[j] as f64).sum::<f64>() / x.len().max(1) as f64;
                x.iter().map(|r| sq(r[j] as f64 - all_mean)).sum::<f64>() / x.len().max(1) as f64
            })
            .fold(0.0, f64::max);
        let eps = var_smoothing * max_var.max(1e-300);
        for c in 0..2 {
            var[c].iter_mut().for_each(|v| *v = *v / n[c].max(1.0) + eps);
        }
        let total = n[0] + n[1];
        Self {
            log_prior: [math::ln(n[0].max(1e-300) / total), math::ln(n[1].max(1e-300) / total)],
            mean,
            var,
        }
    }

    pub fn predict_proba(&self, q: &[f32]) -> f64 {
        let mut ll = self.log_prior;
        for c in 0..2 {
            for j in 0..q.len() {
                let e = q[j] as f64 - self.mean[c][j];
                ll[c] -= 0.5 * (math::ln(core::f64::consts::TAU * self.var[c][j]) + e * e / self.var[c][j]);
            }
        }
        1.0 / (1.0 + math::exp(ll[0] - ll[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    /// Random Fourier features approximating the RBF kernel.
    pub features: usize,
    /// Inverse regularization, as in C-SVC.
    pub c: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            features: 1024,
            c: 1.0,
            epochs: 30,
        }
    }
}

/// RBF-kernel SVM approximated with random Fourier features and trained by
/// Pegasos (hinge loss, stochastic sub-gradient).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RffSvm {
    omega: Vec<Vec<f32>>,
    phase: Vec<f32>,
    w: Vec<f64>,
    b: f64,
}

impl RffSvm {
    fn map(&self, x: &[f32]) -> Vec<f64> {
        let scale = math::sqrt(2.0 / self.omega.len() as f64);
        self.omega
            .iter()
            .zip(&self.phase)
            .map(|(o, p)| {
                let dot: f32 = o.iter().zip(x).map(|(a, b)| a * b).sum();
                scale * math::cos((dot + p) as f64)
            })
            .collect()
    }

    pub fn margin(&self, x: &[f32]) -> f64 {
        self.map(x).iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>() + self.b
    }

    pub(crate) fn fit(x: &[Vec<f32>], y: &[f64], params: &SvmParams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = x.first().map_or(0, |r| r.len());
        // gamma = 1 / (d * Var(X)), the usual "scale" heuristic
        let n_all = (x.len() * d).max(1) as f64;
        let mean = x.iter().flatten().map(|v| *v as f64).sum::<f64>() / n_all;
        let var = x.iter().flatten().map(|v| sq(*v as f64 - mean)).sum::<f64>() / n_all;
        let gamma = 1.0 / (d as f64 * var.max(1e-12));
        let std = math::sqrt(2.0 * gamma) as f32;
        let omega: Vec<Vec<f32>> = (0..params.features)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let z: f32 = StandardNormal.sample(&mut rng);
                        z * std
                    })
                    .collect()
            })
            .collect();
        let phase = (0..params.features)
            .map(|_| rng.random_range(0.0..core::f32::consts::TAU))
            .collect();
        let mut svm = Self {
            omega,
            phase,
            w: vec![0.0; params.features],
            b: 0.0,
        };
        let feats: Vec<Vec<f64>> = x.iter().map(|r| svm.map(r)).collect();
        let n = x.len().max(1);
        let lambda = 1.0 / (params.c * n as f64);
        let mut t = 0usize;
        let mut order: Vec<usize> = (0..x.len()).collect();
        for _ in 0..params.epochs {
            for i in (1..order.len()).rev() {
                let j = rng.random_range(0..=i as u64) as usize;
                order.swap(i, j);
            }
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let yi = if y[i] > 0.5 { 1.0 } else { -1.0 };
                let m: f64 = feats[i].iter().zip(&svm.w).map(|(a, b)| a * b).sum::<f64>() + svm.b;
                svm.w.iter_mut().for_each(|w| *w *= 1.0 - 1.0 / t as f64);
                svm.b *= 1.0 - 1.0 / t as f64;
                if yi * m < 1.0 {
                    for (w, f) in svm.w.iter_mut().zip(&feats[i]) {
                        *w += eta * yi * f;
                    }
                    // bias acts as a regularized constant feature
                    svm.b += eta * yi;
                }
            }
        }
        svm
    }
}
