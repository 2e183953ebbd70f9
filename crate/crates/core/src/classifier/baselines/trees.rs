use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math;

/// Quantile cut points per feature; a value goes left when `x <= cut`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Binner {
    cuts: Vec<Vec<f32>>,
}

impl Binner {
    pub fn fit(x: &[Vec<f32>], max_bins: usize) -> Self {
        let features = x.first().map_or(0, |r| r.len());
        let cuts = (0..features)
            .map(|f| {
                let mut col: Vec<f32> = x.iter().map(|r| r[f]).collect();
                col.sort_by(|a, b| a.total_cmp(b));
                col.dedup();
                if col.len() <= max_bins {
                    // midpoints between neighbouring distinct values
                    col.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
                } else {
                    let mut c: Vec<f32> = (1..max_bins)
                        .map(|k| col[k * col.len() / max_bins])
                        .collect();
                    c.dedup();
                    c
                }
            })
            .collect();
        Self { cuts }
    }

    /// Column-major bin indices.
    pub fn transform(&self, x: &[Vec<f32>]) -> Vec<Vec<u8>> {
        self.cuts
            .iter()
            .enumerate()
            .map(|(f, cuts)| {
                x.iter()
                    .map(|r| cuts.partition_point(|c| *c < r[f]) as u8)
                    .collect()
            })
            .collect()
    }

    fn bins(&self, f: usize) -> usize {
        self.cuts[f].len() + 1
    }

    fn cut(&self, f: usize, bin: usize) -> f32 {
        self.cuts[f][bin]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: u16,
        threshold: f32,
        left: u32,
        right: u32,
    },
}

/// Binary decision tree over raw feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f32]) -> f64 {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature as usize] <= threshold { left } else { right } as usize;
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn d(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + d(nodes, left as usize).max(d(nodes, right as usize)),
            }
        }
        d(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` for all.
    pub max_features: Option<usize>,
}

/// Per-sample statistics a split criterion needs.
trait Criterion {
    /// Accumulated statistics of a bin or a node.
    type Stat: Copy + Default + core::ops::Add<Output = Self::Stat> + core::ops::Sub<Output = Self::Stat>;
    fn stat(&self, i: usize) -> Self::Stat;
    fn count(s: &Self::Stat) -> f64;
    /// Score of a node; splits maximize `score(L) + score(R) - score(parent)`.
    fn score(&self, s: &Self::Stat) -> f64;
    fn leaf(&self, s: &Self::Stat) -> f64;
    fn child_ok(&self, s: &Self::Stat, min_leaf: usize) -> bool {
        Self::count(s) >= min_leaf as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Counts {
    n: f64,
    pos: f64,
}

impl core::ops::Add for Counts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            pos: self.pos + o.pos,
        }
    }
}

impl core::ops::Sub for Counts {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            n: self.n - o.n,
            pos: self.pos - o.pos,
        }
    }
}

struct Gini<'a> {
    y: &'a [f64],
}

impl Criterion for Gini<'_> {
    type Stat = Counts;
    fn stat(&self, i: usize) -> Counts {
        Counts { n: 1.0, pos: self.y[i] }
    }
    fn count(s: &Counts) -> f64 {
        s.n
    }
    fn score(&self, s: &Counts) -> f64 {
        // negative weighted Gini impurity: -(n - (pos^2 + neg^2) / n)
        if s.n == 0.0 {
            return 0.0;
        }
        let neg = s.n - s.pos;
        (s.pos * s.pos + neg * neg) / s.n - s.n
    }
    fn leaf(&self, s: &Counts) -> f64 {
        if s.n == 0.0 {
            0.5
        } else {
            s.pos / s.n
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct GradHess {
    g: f64,
    h: f64,
    n: f64,
}

impl core::ops::Add for GradHess {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            g: self.g + o.g,
            h: self.h + o.h,
            n: self.n + o.n,
        }
    }
}

impl core::ops::Sub for GradHess {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

struct Newton<'a> {
    g: &'a [f64],
    h: &'a [f64],
    lambda: f64,
    eta: f64,
    min_child_weight: f64,
}

impl Criterion for Newton<'_> {
    type Stat = GradHess;
    fn stat(&self, i: usize) -> GradHess {
        GradHess {
            g: self.g[i],
            h: self.h[i],
            n: 1.0,
        }
    }
    fn count(s: &GradHess) -> f64 {
        s.n
    }
    fn score(&self, s: &GradHess) -> f64 {
        s.g * s.g / (s.h + self.lambda)
    }
    fn leaf(&self, s: &GradHess) -> f64 {
        -self.eta * s.g / (s.h + self.lambda)
    }
    fn child_ok(&self, s: &GradHess, min_leaf: usize) -> bool {
        s.n >= min_leaf as f64 && s.h >= self.min_child_weight
    }
}

struct Builder<'a, C: Criterion> {
    binner: &'a Binner,
    bins: &'a [Vec<u8>],
    crit: C,
    params: TreeParams,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
}

impl<C: Criterion> Builder<'_, C> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> u32 {
        let total = idx.iter().fold(C::Stat::default(), |a, i| a + self.crit.stat(*i));
        let me = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf(self.crit.leaf(&total)));
        if depth >= self.params.max_depth || C::count(&total) < 2.0 * self.params.min_samples_leaf as f64 {
            return me;
        }
        let Some((feature, bin)) = self.best_split(idx, &total) else {
            return me;
        };
        let col = &self.bins[feature];
        let mut k = 0;
        for j in 0..idx.len() {
            if col[idx[j]] as usize <= bin {
                idx.swap(j, k);
                k += 1;
            }
        }
        let (l, r) = idx.split_at_mut(k);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[me as usize] = Node::Split {
            feature: feature as u16,
            threshold: self.binner.cut(feature, bin),
            left,
            right,
        };
        me
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let n = self.bins.len();
        match self.params.max_features {
            Some(m) if m < n => {
                let mut all: Vec<usize> = (0..n).collect();
                for i in 0..m {
                    let j = self.rng.random_range(i as u64..n as u64) as usize;
                    all.swap(i, j);
                }
                all.truncate(m);
                all
            }
            _ => (0..n).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize], total: &C::Stat) -> Option<(usize, usize)> {
        let parent = self.crit.score(total);
        let mut best: Option<(f64, usize, usize)> = None;
        for f in self.candidate_features() {
            let nb = self.binner.bins(f);
            if nb < 2 {
                continue;
            }
            let mut hist = vec![C::Stat::default(); nb];
            let col = &self.bins[f];
            for &i in idx {
                let b = col[i] as usize;
                hist[b] = hist[b] + self.crit.stat(i);
            }
            let mut left = C::Stat::default();
            for (b, h) in hist.iter().enumerate().take(nb - 1) {
                left = left + *h;
                let right = *total - left;
                if !self.crit.child_ok(&left, self.params.min_samples_leaf)
                    || !self.crit.child_ok(&right, self.params.min_samples_leaf)
                {
                    continue;
                }
                let gain = self.crit.score(&left) + self.crit.score(&right) - parent;
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, b));
                }
            }
        }
        best.map(|(_, f, b)| (f, b))
    }
}

pub(crate) fn fit_tree(binner: &Binner, bins: &[Vec<u8>], y: &[f64], idx: &mut [usize], params: TreeParams, seed: u64) -> Tree {
    let mut b = Builder {
        binner,
        bins,
        crit: Gini { y },
        params,
        nodes: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    b.build(idx, 0);
    Tree { nodes: b.nodes }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub eta: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
    pub max_bins: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 6,
            eta: 0.3,
            lambda: 1.0,
            min_child_weight: 1.0,
            max_bins: 64,
        }
    }
}

/// Logistic-loss gradient boosting with second-order leaf weights.
pub(crate) fn fit_boosted(binner: &Binner, bins: &[Vec<u8>], x: &[Vec<f32>], y: &[f64], params: &BoostParams) -> Vec<Tree> {
    let n = y.len();
    let mut margin = vec![0.0f64; n];
    let mut trees = Vec::with_capacity(params.rounds);
    for round in 0..params.rounds {
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for i in 0..n {
            let p = 1.0 / (1.0 + math::exp(-margin[i]));
            g[i] = p - y[i];
            h[i] = (p * (1.0 - p)).max(1e-16);
        }
        let mut idx: Vec<usize> = (0..n).collect();
        let mut b = Builder {
            binner,
            bins,
            crit: Newton {
                g: &g,
                h: &h,
                lambda: params.lambda,
                eta: params.eta,
                min_child_weight: params.min_child_weight,
            },
            params: TreeParams {
                max_depth: params.max_depth,
                min_samples_leaf: 1,
                max_features: None,
            },
            nodes: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(round as u64),
        };
        b.build(&mut idx, 0);
        let tree = Tree { nodes: b.nodes };
        for i in 0..n {
            margin[i] += tree.predict(&x[i]);
        }
        trees.push(tree);
    }
    trees
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_data() -> (Vec<Vec<f32>>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                let (a, b) = (i as f32 / 19.0, j as f32 / 19.0);
                x.push(vec![a, b, 0.3]);
                y.push(if (a > 0.3) ^ (b > 0.6) { 1.0 } else { 0.0 });
            }
        }
        (x, y)
    }

    #[test]
    fn tree_learns_xor() {
        let (x, y) = xor_data();
        let binner = Binner::fit(&x, 64);
        let bins = binner.transform(&x);
        let mut idx: Vec<usize> = (0..x.len()).collect();
        let params = TreeParams {
            max_depth: 8,
            min_samples_leaf: 1,
            max_features: None,
        };
        let t = fit_tree(&binner, &bins, &y, &mut idx, params, 0);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(t.predict(xi), *yi);
        }
        assert!(t.depth() <= 8);
    }

    #[test]
    fn boosting_learns_xor() {
        let (x, y) = xor_data();
        let binner = Binner::fit(&x, 64);
        let bins = binner.transform(&x);
        let trees = fit_boosted(&binner, &bins, &x, &y, &BoostParams::default());
        let errors = x
            .iter()
            .zip(&y)
            .filter(|(xi, yi)| {
                let m: f64 = trees.iter().map(|t| t.predict(xi)).sum();
                (m > 0.0) != (**yi > 0.5)
            })
            .count();
        assert_eq!(errors, 0);
    }
}
