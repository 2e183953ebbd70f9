use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::matrix::{gemm, Matrix, Trans};
use super::param::{Gradients, ParamId, ParamStore};
use crate::math;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(usize, usize),
    /// `a * b^T`
    MatMulT(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    Mul(usize, usize),
    Scale(usize, f32),
    AddScalar(usize),
    Gelu(usize),
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Softmax(usize),
    LayerNorm {
        x: usize,
        gamma: usize,
        beta: usize,
        xhat: Matrix,
        rstd: Vec<f32>,
    },
    Gather {
        table: usize,
        ids: Vec<u32>,
    },
    SliceCols {
        a: usize,
        start: usize,
    },
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    WeightedRowSum {
        a: usize,
        w: Vec<f32>,
    },
    MeanCols(usize),
    Unfold {
        a: usize,
        k: usize,
    },
    Dropout {
        a: usize,
        mask: Vec<f32>,
    },
    CrossEntropy {
        logits: usize,
        targets: Vec<usize>,
        probs: Matrix,
    },
}

struct Node {
    op: Op,
    value: Option<Matrix>,
    needs_grad: bool,
}

/// Reverse-mode autodiff recording over one forward pass.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    /// Whether gradients are wanted at all; false for inference.
    grad_enabled: bool,
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::with_capacity(256),
            grad_enabled: true,
        }
    }

    pub fn inference(store: &'a ParamStore) -> Self {
        Self {
            grad_enabled: false,
            ..Self::new(store)
        }
    }

    pub fn value(&self, v: Var) -> &Matrix {
        self.val(v.0)
    }

    fn val(&self, i: usize) -> &Matrix {
        match (&self.nodes[i].op, &self.nodes[i].value) {
            (_, Some(m)) => m,
            (Op::Param(p), None) => self.store.value(*p),
            _ => unreachable!("node without value"),
        }
    }

    fn push(&mut self, op: Op, value: Matrix, parents: &[usize]) -> Var {
        let needs_grad = self.grad_enabled && parents.iter().any(|p| self.nodes[*p].needs_grad);
        self.nodes.push(Node {
            op,
            value: Some(value),
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, m: Matrix) -> Var {
        self.nodes.push(Node {
            op: Op::Input,
            value: Some(m),
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let needs_grad = self.grad_enabled && self.store.get(id).trainable;
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ma, mb) = (self.val(a.0), self.val(b.0));
        let mut c = Matrix::zeros(ma.rows, mb.cols);
        gemm(1.0, ma, Trans::N, mb, Trans::N, 0.0, &mut c);
        self.push(Op::MatMul(a.0, b.0), c, &[a.0, b.0])
    }

    /// `a * b^T`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (ma, mb) = (self.val(a.0), self.val(b.0));
        let mut c = Matrix::zeros(ma.rows, mb.rows);
        gemm(1.0, ma, Trans::N, mb, Trans::T, 0.0, &mut c);
        self.push(Op::MatMulT(a.0, b.0), c, &[a.0, b.0])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut c = self.val(a.0).clone();
        c.add_assign(self.val(b.0));
        self.push(Op::Add(a.0, b.0), c, &[a.0, b.0])
    }

    /// Adds row vector `b` (1 x cols) to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let mut c = self.val(a.0).clone();
        let row = self.val(b.0);
        assert_eq!((row.rows, row.cols), (1, c.cols), "add_row shape");
        for r in 0..c.rows {
            for (x, y) in c.row_mut(r).iter_mut().zip(&row.data) {
                *x += *y;
            }
        }
        self.push(Op::AddRow(a.0, b.0), c, &[a.0, b.0])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let mut c = self.val(a.0).clone();
        let mb = self.val(b.0);
        assert_eq!(c.shape(), mb.shape(), "mul shape");
        for (x, y) in c.data.iter_mut().zip(&mb.data) {
            *x *= *y;
        }
        self.push(Op::Mul(a.0, b.0), c, &[a.0, b.0])
    }

    pub fn scale(&mut self, a: Var, s: f32) -> Var {
        let mut c = self.val(a.0).clone();
        c.data.iter_mut().for_each(|x| *x *= s);
        self.push(Op::Scale(a.0, s), c, &[a.0])
    }

    pub fn add_scalar(&mut self, a: Var, s: f32) -> Var {
        let mut c = self.val(a.0).clone();
        c.data.iter_mut().for_each(|x| *x += s);
        self.push(Op::AddScalar(a.0), c, &[a.0])
    }

    /// `1 - a`
    pub fn one_minus(&mut self, a: Var) -> Var {
        let n = self.scale(a, -1.0);
        self.add_scalar(n, 1.0)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f32) -> f32) -> Var {
        let mut c = self.val(a.0).clone();
        c.data.iter_mut().for_each(|x| *x = f(*x));
        self.push(op, c, &[a.0])
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        self.map(a, Op::Gelu(a.0), gelu)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu(a.0), |x| x.max(0.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a.0), math::tanhf)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a.0), sigmoid)
    }

    /// Row-wise softmax. With `causal`, entry `(i, j)` for `j > i` is exactly 0.
    pub fn softmax_rows(&mut self, a: Var, causal: bool) -> Var {
        let mut c = self.val(a.0).clone();
        for r in 0..c.rows {
            let limit = if causal { (r + 1).min(c.cols) } else { c.cols };
            let row = c.row_mut(r);
            softmax_in_place(&mut row[..limit]);
            row[limit..].iter_mut().for_each(|x| *x = 0.0);
        }
        self.push(Op::Softmax(a.0), c, &[a.0])
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let mx = self.val(x.0);
        let (g, b) = (self.val(gamma.0), self.val(beta.0));
        let mut xhat = Matrix::zeros(mx.rows, mx.cols);
        let mut out = Matrix::zeros(mx.rows, mx.cols);
        let mut rstd = vec![0.0; mx.rows];
        let n = mx.cols as f32;
        for r in 0..mx.rows {
            let row = mx.row(r);
            let mean = row.iter().sum::<f32>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
            let rs = 1.0 / math::sqrtf(var + 1e-5);
            rstd[r] = rs;
            for c in 0..mx.cols {
                let h = (row[c] - mean) * rs;
                xhat.set(r, c, h);
                out.set(r, c, h * g.data[c] + b.data[c]);
            }
        }
        self.push(
            Op::LayerNorm {
                x: x.0,
                gamma: gamma.0,
                beta: beta.0,
                xhat,
                rstd,
            },
            out,
            &[x.0, gamma.0, beta.0],
        )
    }

    /// Rows of `table` selected by `ids`.
    pub fn gather(&mut self, table: Var, ids: &[u32]) -> Var {
        let t = self.val(table.0);
        let mut out = Matrix::zeros(ids.len(), t.cols);
        for (r, id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(*id as usize));
        }
        self.push(
            Op::Gather {
                table: table.0,
                ids: ids.to_vec(),
            },
            out,
            &[table.0],
        )
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.val(a.0);
        assert!(start + len <= m.cols, "slice_cols range");
        let out = Matrix::from_fn(m.rows, len, |r, c| m.get(r, start + c));
        self.push(Op::SliceCols { a: a.0, start }, out, &[a.0])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.val(parts[0].0).rows;
        let cols: usize = parts.iter().map(|p| self.val(p.0).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let m = self.val(p.0);
            assert_eq!(m.rows, rows, "concat_cols rows");
            for r in 0..rows {
                out.row_mut(r)[off..off + m.cols].copy_from_slice(m.row(r));
            }
            off += m.cols;
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        self.push(Op::ConcatCols(ids.clone()), out, &ids)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.val(parts[0].0).cols;
        let mut data = Vec::new();
        for p in parts {
            let m = self.val(p.0);
            assert_eq!(m.cols, cols, "concat_rows cols");
            data.extend_from_slice(&m.data);
        }
        let rows = data.len() / cols.max(1);
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        self.push(Op::ConcatRows(ids.clone()), Matrix::from_vec(rows, cols, data), &ids)
    }

    /// `sum_i w_i * a[i, :]` as a 1 x cols row.
    pub fn weighted_row_sum(&mut self, a: Var, w: &[f32]) -> Var {
        let m = self.val(a.0);
        assert_eq!(w.len(), m.rows, "weighted_row_sum weights");
        let mut out = Matrix::zeros(1, m.cols);
        for (r, wr) in w.iter().enumerate() {
            if *wr == 0.0 {
                continue;
            }
            for (o, x) in out.data.iter_mut().zip(m.row(r)) {
                *o += wr * x;
            }
        }
        self.push(Op::WeightedRowSum { a: a.0, w: w.to_vec() }, out, &[a.0])
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let n = self.val(a.0).rows;
        let w = vec![1.0 / n as f32; n];
        self.weighted_row_sum(a, &w)
    }

    /// Mean of each row, as a rows x 1 column.
    pub fn mean_cols(&mut self, a: Var) -> Var {
        let m = self.val(a.0);
        let out = Matrix::from_fn(m.rows, 1, |r, _| m.row(r).iter().sum::<f32>() / m.cols as f32);
        self.push(Op::MeanCols(a.0), out, &[a.0])
    }

    /// Sliding windows of `k` rows flattened side by side:
    /// `(T, C) -> (T - k + 1, k * C)`.
    pub fn unfold(&mut self, a: Var, k: usize) -> Var {
        let m = self.val(a.0);
        assert!(k >= 1 && k <= m.rows, "unfold width");
        let rows = m.rows - k + 1;
        let mut out = Matrix::zeros(rows, k * m.cols);
        for r in 0..rows {
            out.row_mut(r).copy_from_slice(&m.data[r * m.cols..(r + k) * m.cols]);
        }
        self.push(Op::Unfold { a: a.0, k }, out, &[a.0])
    }

    /// Inverted dropout with drop probability `p`; identity when `p == 0`.
    pub fn dropout<R: Rng>(&mut self, a: Var, p: f32, rng: &mut R) -> Var {
        if p <= 0.0 {
            return a;
        }
        let m = self.val(a.0);
        let keep = 1.0 - p;
        let mask: Vec<f32> = (0..m.len())
            .map(|_| if rng.random::<f32>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let mut out = m.clone();
        for (x, k) in out.data.iter_mut().zip(&mask) {
            *x *= k;
        }
        self.push(Op::Dropout { a: a.0, mask }, out, &[a.0])
    }

    /// Mean softmax cross-entropy of `logits` (one row per example).
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let m = self.val(logits.0);
        assert_eq!(m.rows, targets.len(), "cross_entropy targets");
        let mut probs = m.clone();
        let mut loss = 0.0f32;
        for (r, t) in targets.iter().enumerate() {
            let row = probs.row_mut(r);
            softmax_in_place(row);
            loss -= math::lnf(row[*t].max(1e-12));
        }
        loss /= targets.len() as f32;
        self.push(
            Op::CrossEntropy {
                logits: logits.0,
                targets: targets.to_vec(),
                probs,
            },
            Matrix::from_vec(1, 1, vec![loss]),
            &[logits.0],
        )
    }

    /// Back-propagates from scalar `loss`; returns parameter gradients.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut pg = Gradients::for_store(self.store);
        self.backward_into(loss, &mut pg);
        pg
    }

    /// As [`Self::backward`], adding into an existing accumulator.
    pub fn backward_into(&self, loss: Var, pg: &mut Gradients) {
        let lv = self.val(loss.0);
        assert_eq!(lv.len(), 1, "backward needs a scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads, pg);
        }
    }

    fn wants(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    fn backprop_node(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>], pg: &mut Gradients) {
        let acc = |grads: &mut [Option<Matrix>], j: usize, d: Matrix| match &mut grads[j] {
            Some(e) => e.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        match &self.nodes[i].op {
            Op::Input => {}
            Op::Param(p) => pg.accumulate(*p, g),
            Op::MatMul(a, b) => {
                let (ma, mb) = (self.val(*a), self.val(*b));
                if self.wants(*a) {
                    let mut d = Matrix::zeros(ma.rows, ma.cols);
                    gemm(1.0, g, Trans::N, mb, Trans::T, 0.0, &mut d);
                    acc(grads, *a, d);
                }
                if self.wants(*b) {
                    let mut d = Matrix::zeros(mb.rows, mb.cols);
                    gemm(1.0, ma, Trans::T, g, Trans::N, 0.0, &mut d);
                    acc(grads, *b, d);
                }
            }
            Op::MatMulT(a, b) => {
                let (ma, mb) = (self.val(*a), self.val(*b));
                if self.wants(*a) {
                    let mut d = Matrix::zeros(ma.rows, ma.cols);
                    gemm(1.0, g, Trans::N, mb, Trans::N, 0.0, &mut d);
                    acc(grads, *a, d);
                }
                if self.wants(*b) {
                    let mut d = Matrix::zeros(mb.rows, mb.cols);
                    gemm(1.0, g, Trans::T, ma, Trans::N, 0.0, &mut d);
                    acc(grads, *b, d);
                }
            }
            Op::Add(a, b) => {
                if self.wants(*a) {
                    acc(grads, *a, g.clone());
                }
                if self.wants(*b) {
                    acc(grads, *b, g.clone());
                }
            }
            Op::AddRow(a, b) => {
                if self.wants(*a) {
                    acc(grads, *a, g.clone());
                }
                if self.wants(*b) {
                    let mut d = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (x, y) in d.data.iter_mut().zip(g.row(r)) {
                            *x += *y;
                        }
                    }
                    acc(grads, *b, d);
                }
            }
            Op::Mul(a, b) => {
                let (ma, mb) = (self.val(*a), self.val(*b));
                if self.wants(*a) {
                    let mut d = g.clone();
                    d.data.iter_mut().zip(&mb.data).for_each(|(x, y)| *x *= *y);
                    acc(grads, *a, d);
                }
                if self.wants(*b) {
                    let mut d = g.clone();
                    d.data.iter_mut().zip(&ma.data).for_each(|(x, y)| *x *= *y);
                    acc(grads, *b, d);
                }
            }
            Op::Scale(a, s) => {
                let mut d = g.clone();
                d.data.iter_mut().for_each(|x| *x *= *s);
                acc(grads, *a, d);
            }
            Op::AddScalar(a) => acc(grads, *a, g.clone()),
            Op::Gelu(a) => {
                let x = self.val(*a);
                let mut d = g.clone();
                d.data.iter_mut().zip(&x.data).for_each(|(gd, xv)| *gd *= gelu_grad(*xv));
                acc(grads, *a, d);
            }
            Op::Relu(a) => {
                let x = self.val(*a);
                let mut d = g.clone();
                d.data
                    .iter_mut()
                    .zip(&x.data)
                    .for_each(|(gd, xv)| if *xv <= 0.0 { *gd = 0.0 });
                acc(grads, *a, d);
            }
            Op::Tanh(a) => {
                let y = self.val(i);
                let mut d = g.clone();
                d.data.iter_mut().zip(&y.data).for_each(|(gd, yv)| *gd *= 1.0 - yv * yv);
                acc(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                let y = self.val(i);
                let mut d = g.clone();
                d.data.iter_mut().zip(&y.data).for_each(|(gd, yv)| *gd *= yv * (1.0 - yv));
                acc(grads, *a, d);
            }
            Op::Softmax(a) => {
                let y = self.val(i);
                let mut d = g.clone();
                for r in 0..y.rows {
                    let yr = y.row(r);
                    let dr = d.row_mut(r);
                    let dot: f32 = dr.iter().zip(yr).map(|(x, p)| x * p).sum();
                    dr.iter_mut().zip(yr).for_each(|(x, p)| *x = p * (*x - dot));
                }
                acc(grads, *a, d);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let gm = self.val(*gamma);
                let n = xhat.cols as f32;
                if self.wants(*gamma) {
                    let mut d = Matrix::zeros(1, xhat.cols);
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            d.data[c] += g.get(r, c) * xhat.get(r, c);
                        }
                    }
                    acc(grads, *gamma, d);
                }
                if self.wants(*beta) {
                    let mut d = Matrix::zeros(1, xhat.cols);
                    for r in 0..g.rows {
                        for (x, y) in d.data.iter_mut().zip(g.row(r)) {
                            *x += *y;
                        }
                    }
                    acc(grads, *beta, d);
                }
                if self.wants(*x) {
                    let mut d = Matrix::zeros(g.rows, g.cols);
                    for r in 0..g.rows {
                        let gh: Vec<f32> = (0..g.cols).map(|c| g.get(r, c) * gm.data[c]).collect();
                        let mean_gh = gh.iter().sum::<f32>() / n;
                        let mean_ghx = gh.iter().zip(xhat.row(r)).map(|(a, b)| a * b).sum::<f32>() / n;
                        for c in 0..g.cols {
                            let v = rstd[r] * (gh[c] - mean_gh - xhat.get(r, c) * mean_ghx);
                            d.set(r, c, v);
                        }
                    }
                    acc(grads, *x, d);
                }
            }
            Op::Gather { table, ids } => {
                let t = self.val(*table);
                if let Op::Param(p) = self.nodes[*table].op {
                    // scatter straight into the parameter gradient
                    let slot = pg.slot(p, t.rows, t.cols);
                    for (r, id) in ids.iter().enumerate() {
                        for (x, y) in slot.row_mut(*id as usize).iter_mut().zip(g.row(r)) {
                            *x += *y;
                        }
                    }
                } else {
                    let mut d = Matrix::zeros(t.rows, t.cols);
                    for (r, id) in ids.iter().enumerate() {
                        for (x, y) in d.row_mut(*id as usize).iter_mut().zip(g.row(r)) {
                            *x += *y;
                        }
                    }
                    acc(grads, *table, d);
                }
            }
            Op::SliceCols { a, start } => {
                let m = self.val(*a);
                let mut d = Matrix::zeros(m.rows, m.cols);
                for r in 0..g.rows {
                    d.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                }
                acc(grads, *a, d);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let cols = self.val(*p).cols;
                    if self.wants(*p) {
                        let d = Matrix::from_fn(g.rows, cols, |r, c| g.get(r, off + c));
                        acc(grads, *p, d);
                    }
                    off += cols;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let m = self.val(*p);
                    let n = m.len();
                    if self.wants(*p) {
                        let d = Matrix::from_vec(m.rows, m.cols, g.data[off..off + n].to_vec());
                        acc(grads, *p, d);
                    }
                    off += n;
                }
            }
            Op::WeightedRowSum { a, w } => {
                let m = self.val(*a);
                let mut d = Matrix::zeros(m.rows, m.cols);
                for (r, wr) in w.iter().enumerate() {
                    for (x, y) in d.row_mut(r).iter_mut().zip(&g.data) {
                        *x = wr * y;
                    }
                }
                acc(grads, *a, d);
            }
            Op::MeanCols(a) => {
                let m = self.val(*a);
                let d = Matrix::from_fn(m.rows, m.cols, |r, _| g.data[r] / m.cols as f32);
                acc(grads, *a, d);
            }
            Op::Unfold { a, k } => {
                let m = self.val(*a);
                let mut d = Matrix::zeros(m.rows, m.cols);
                for r in 0..g.rows {
                    let src = g.row(r);
                    for (x, y) in d.data[r * m.cols..(r + k) * m.cols].iter_mut().zip(src) {
                        *x += *y;
                    }
                }
                acc(grads, *a, d);
            }
            Op::Dropout { a, mask } => {
                let mut d = g.clone();
                d.data.iter_mut().zip(mask).for_each(|(x, k)| *x *= k);
                acc(grads, *a, d);
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let scale = g.data[0] / targets.len() as f32;
                let mut d = probs.clone();
                for (r, t) in targets.iter().enumerate() {
                    let row = d.row_mut(r);
                    row[*t] -= 1.0;
                    row.iter_mut().for_each(|x| *x *= scale);
                }
                acc(grads, *logits, d);
            }
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f32]) {
    if row.is_empty() {
        return;
    }
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = math::expf(*x - max);
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

const FRAC_1_SQRT_2: f32 = core::f32::consts::FRAC_1_SQRT_2;

pub(crate) fn gelu(x: f32) -> f32 {
    0.5 * x * (1.0 + math::erff(x * FRAC_1_SQRT_2))
}

fn gelu_grad(x: f32) -> f32 {
    let cdf = 0.5 * (1.0 + math::erff(x * FRAC_1_SQRT_2));
    let pdf = math::expf(-0.5 * x * x) * 0.398_942_3;
    cdf + x * pdf
}

pub(crate) fn sigmoid(x: f32) -> f32 {
    if x >= 0.0 {
        1.0 / (1.0 + math::expf(-x))
    } else {
        let e = math::expf(x);
        e / (1.0 + e)
    }
}
