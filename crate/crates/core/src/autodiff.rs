//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is a Wengert list: every operation appends a node whose
//! parents precede it, so node order is already a topological order. Leaves
//! may borrow their values (model weights) for the lifetime of the graph.
//! Nodes that do not depend on any gradient-requiring leaf are never
//! visited by [`Graph::backward`].

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulBT(Var, Var),
    Add(Var, Var),
    AddN(Vec<Var>),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Softmax(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Gelu(Var, Vec<f64>),
    Tanh(Var),
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<f64> },
    MaskedFill(Var, Vec<bool>),
    SliceCols(Var, usize, usize),
    SliceRows(Var, usize, usize),
    ConcatCols(Vec<Var>),
    Mean(Var),
    Sum(Var),
    Hinge(Var, f64),
    GatherRows(Var, Vec<usize>),
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    requires_grad: bool,
}

const LN_EPS: f64 = 1e-5;

pub struct Graph<'p> {
    nodes: Vec<Node<'p>>,
    grads: Vec<Option<Tensor>>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape()))
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), grads: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, Tensor>, op: Op, requires_grad: bool) -> Var {
        debug_assert!(value.is_finite(), "non-finite value from {op:?}");
        self.nodes.push(Node { value, op, requires_grad });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf owning its value.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, true)
    }

    /// Trainable leaf borrowing its value.
    pub fn param_ref(&mut self, value: &'p Tensor) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, false)
    }

    pub fn constant_ref(&mut self, value: &'p Tensor) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Accumulated gradient of `v`; `None` if no backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor> {
        self.grads[v.0].take()
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            *g = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = (av.dims2(), bv.dims2());
        if k != k2 {
            return Err(mismatch("matmul", av, bv));
        }
        let mut out = vec![0.0; m * n];
        tensor::matmul_acc(av.data(), bv.data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Cow::Owned(Tensor::new(vec![m, n], out)?), Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let ((m, k), (n, k2)) = (av.dims2(), bv.dims2());
        if k != k2 {
            return Err(mismatch("matmul_bt", av, bv));
        }
        let mut out = vec![0.0; m * n];
        tensor::matmul_bt_acc(av.data(), bv.data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Cow::Owned(Tensor::new(vec![m, n], out)?), Op::MatMulBT(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(mismatch("add", av, bv));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Cow::Owned(value), Op::Add(a, b), rg))
    }

    pub fn add_n(&mut self, vars: &[Var]) -> Result<Var> {
        let first = *vars.first().ok_or_else(|| Error::invalid("add_n of nothing"))?;
        let mut acc = self.value(first).clone();
        for &v in &vars[1..] {
            let t = self.value(v);
            if t.shape() != acc.shape() {
                return Err(mismatch("add_n", &acc, t));
            }
            acc.add_assign(t);
        }
        let rg = vars.iter().any(|&v| self.rg(v));
        Ok(self.push(Cow::Owned(acc), Op::AddN(vars.to_vec()), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(mismatch("mul", av, bv));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Cow::Owned(value), Op::Mul(a, b), rg))
    }

    /// Adds a `[1, n]` row to every row of an `[m, n]` tensor.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        let (m, n) = av.dims2();
        if rv.len() != n {
            return Err(mismatch("add_row", av, rv));
        }
        let mut out = av.data().to_vec();
        for i in 0..m {
            for (o, r) in out[i * n..(i + 1) * n].iter_mut().zip(rv.data()) {
                *o += r;
            }
        }
        let rg = self.rg(a) || self.rg(row);
        Ok(self.push(Cow::Owned(Tensor::new(vec![m, n], out)?), Op::AddRow(a, row), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let av = self.value(a);
        let value = Tensor::new(av.shape().to_vec(), av.data().iter().map(|x| x * s).collect())
            .expect("same shape");
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Scale(a, s), rg)
    }

    /// Softmax over the last axis, with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let (m, n) = av.dims2();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            tensor::softmax_row(av.row(i), &mut out[i * n..(i + 1) * n]);
        }
        let value = Tensor::new(av.shape().to_vec(), out).expect("same shape");
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Softmax(a), rg)
    }

    /// Row-wise layer normalization with gain and bias rows.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let (m, n) = xv.dims2();
        if self.value(gain).len() != n || self.value(bias).len() != n {
            return Err(mismatch("layer_norm", xv, self.value(gain)));
        }
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut xhat = vec![0.0; m * n];
        let mut inv_std = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std[i] = inv;
            for j in 0..n {
                let h = (row[j] - mean) * inv;
                xhat[i * n + j] = h;
                out[i * n + j] = h * g[j] + b[j];
            }
        }
        let value = Tensor::new(vec![m, n], out)?;
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(Cow::Owned(value), Op::LayerNorm { x, gain, bias, xhat, inv_std }, rg))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let t: Vec<f64> = av.data().iter().map(|&x| gelu_tanh(x)).collect();
        let data = av.data().iter().zip(&t).map(|(&x, &t)| 0.5 * x * (1.0 + t)).collect();
        let value = Tensor::new(av.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Gelu(a, t), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let data = av.data().iter().map(|x| x.tanh()).collect();
        let value = Tensor::new(av.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Tanh(a), rg)
    }

    /// Mean cross-entropy of each logit row against its target index.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        let (m, n) = lv.dims2();
        if targets.len() != m {
            return Err(Error::Shape(format!(
                "cross_entropy: logits {:?} vs {} targets",
                lv.shape(),
                targets.len()
            )));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= n) {
            return Err(Error::invalid(format!("cross_entropy: target {t} out of {n} classes")));
        }
        let mut probs = vec![0.0; m * n];
        let mut loss = 0.0;
        for i in 0..m {
            let row = lv.row(i);
            let p = &mut probs[i * n..(i + 1) * n];
            tensor::softmax_row(row, p);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[targets[i]];
        }
        let rg = self.rg(logits);
        let op = Op::CrossEntropy { logits, targets: targets.to_vec(), probs };
        Ok(self.push(Cow::Owned(Tensor::scalar(loss / m as f64)), op, rg))
    }

    /// Replaces entries where `mask` is true with `fill`.
    pub fn masked_fill(&mut self, a: Var, mask: &[bool], fill: f64) -> Result<Var> {
        let av = self.value(a);
        if mask.len() != av.len() {
            return Err(Error::Shape(format!(
                "masked_fill: {:?} vs mask of {}",
                av.shape(),
                mask.len()
            )));
        }
        let data = av.data().iter().zip(mask).map(|(&x, &m)| if m { fill } else { x }).collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        let rg = self.rg(a);
        Ok(self.push(Cow::Owned(value), Op::MaskedFill(a, mask.to_vec()), rg))
    }

    /// Fills the strict upper triangle of a square score matrix with a large
    /// negative value so that softmax assigns it zero mass.
    pub fn causal_mask(&mut self, scores: Var) -> Result<Var> {
        let (m, n) = self.value(scores).dims2();
        let mask: Vec<bool> = (0..m * n).map(|idx| idx % n > idx / n + (n - m)).collect();
        self.masked_fill(scores, &mask, -1e9)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let av = self.value(a);
        let (m, n) = av.dims2();
        if start >= end || end > n {
            return Err(Error::Shape(format!("slice_cols {start}..{end} of {:?}", av.shape())));
        }
        let w = end - start;
        let mut out = Vec::with_capacity(m * w);
        for i in 0..m {
            out.extend_from_slice(&av.row(i)[start..end]);
        }
        let rg = self.rg(a);
        Ok(self.push(Cow::Owned(Tensor::new(vec![m, w], out)?), Op::SliceCols(a, start, end), rg))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let av = self.value(a);
        let (m, n) = av.dims2();
        if start >= end || end > m {
            return Err(Error::Shape(format!("slice_rows {start}..{end} of {:?}", av.shape())));
        }
        let out = av.data()[start * n..end * n].to_vec();
        let rg = self.rg(a);
        Ok(self.push(
            Cow::Owned(Tensor::new(vec![end - start, n], out)?),
            Op::SliceRows(a, start, end),
            rg,
        ))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::invalid("concat of nothing"))?;
        let m = self.value(first).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let pv = self.value(p);
            if pv.rows() != m {
                return Err(mismatch("concat_cols", self.value(first), pv));
            }
            widths.push(pv.cols());
        }
        let n: usize = widths.iter().sum();
        let mut out = vec![0.0; m * n];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let pv = self.value(p);
            for i in 0..m {
                out[i * n + offset..i * n + offset + w].copy_from_slice(pv.row(i));
            }
            offset += w;
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Cow::Owned(Tensor::new(vec![m, n], out)?), Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let v = av.data().iter().sum::<f64>() / av.len() as f64;
        let rg = self.rg(a);
        self.push(Cow::Owned(Tensor::scalar(v)), Op::Mean(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.value(a).data().iter().sum::<f64>();
        let rg = self.rg(a);
        self.push(Cow::Owned(Tensor::scalar(v)), Op::Sum(a), rg)
    }

    /// Elementwise `max(0, tau - a)`. The subgradient at `a == tau` is 0.
    pub fn hinge(&mut self, a: Var, tau: f64) -> Var {
        let av = self.value(a);
        let data = av.data().iter().map(|&x| (tau - x).max(0.0)).collect();
        let value = Tensor::new(av.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(Cow::Owned(value), Op::Hinge(a, tau), rg)
    }

    /// Row lookup `table[ids[i]]`, as used for embeddings.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        let (m, n) = tv.dims2();
        if let Some(&bad) = ids.iter().find(|&&i| i >= m) {
            return Err(Error::invalid(format!("gather_rows: id {bad} out of {m} rows")));
        }
        if ids.is_empty() {
            return Err(Error::invalid("gather_rows: no ids"));
        }
        let mut out = Vec::with_capacity(ids.len() * n);
        for &i in ids {
            out.extend_from_slice(tv.row(i));
        }
        let rg = self.rg(table);
        Ok(self.push(
            Cow::Owned(Tensor::new(vec![ids.len(), n], out)?),
            Op::GatherRows(table, ids.to_vec()),
            rg,
        ))
    }

    /// Backpropagates from a scalar `loss`, adding into the stored gradients
    /// of every node that requires them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar loss, got {:?}",
                self.value(loss).shape()
            )));
        }
        if !self.rg(loss) {
            return Ok(());
        }
        let mut local: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        local[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(gout) = local[idx].take() else { continue };
            self.propagate(idx, &gout, &mut local);
            match &mut self.grads[idx] {
                Some(acc) => acc.add_assign(&gout),
                slot @ None => *slot = Some(gout),
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, gout: &Tensor, local: &mut [Option<Tensor>]) {
        let node = &self.nodes[idx];
        let g = gout.data();
        let mut send = |v: Var, f: &dyn Fn(&mut [f64])| {
            if !self.rg(v) {
                return;
            }
            let slot = local[v.0].get_or_insert_with(|| Tensor::zeros(self.value(v).shape()));
            f(slot.data_mut());
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let ((m, k), (_, n)) = (av.dims2(), bv.dims2());
                send(*a, &|d| tensor::matmul_bt_acc(g, bv.data(), d, m, n, k));
                send(*b, &|d| tensor::matmul_at_acc(av.data(), g, d, m, k, n));
            }
            Op::MatMulBT(a, b) => {
                // out[m,n] = a[m,k] b[n,k]^T
                let (av, bv) = (self.value(*a), self.value(*b));
                let ((m, k), (n, _)) = (av.dims2(), bv.dims2());
                send(*a, &|d| tensor::matmul_acc(g, bv.data(), d, m, n, k));
                send(*b, &|d| tensor::matmul_at_acc(g, av.data(), d, m, n, k));
            }
            Op::Add(a, b) => {
                send(*a, &|d| add_into(d, g));
                send(*b, &|d| add_into(d, g));
            }
            Op::AddN(vs) => {
                for &v in vs {
                    send(v, &|d| add_into(d, g));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                send(*a, &|d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * bv[i];
                    }
                });
                send(*b, &|d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * av[i];
                    }
                });
            }
            Op::AddRow(a, row) => {
                let n = self.value(*row).len();
                send(*a, &|d| add_into(d, g));
                send(*row, &|d| {
                    for chunk in g.chunks(n) {
                        add_into(d, chunk);
                    }
                });
            }
            Op::Scale(a, s) => {
                send(*a, &|d| {
                    for (di, gi) in d.iter_mut().zip(g) {
                        *di += gi * s;
                    }
                });
            }
            Op::Softmax(a) => {
                let y = node.value.as_ref();
                let n = y.cols();
                send(*a, &|d| {
                    for (i, yr) in y.data().chunks(n).enumerate() {
                        let gr = &g[i * n..(i + 1) * n];
                        let s = tensor::dot(gr, yr);
                        for j in 0..n {
                            d[i * n + j] += yr[j] * (gr[j] - s);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let n = self.value(*x).cols();
                let gv = self.value(*gain).data();
                send(*gain, &|d| {
                    for (i, gr) in g.chunks(n).enumerate() {
                        for j in 0..n {
                            d[j] += gr[j] * xhat[i * n + j];
                        }
                    }
                });
                send(*bias, &|d| {
                    for gr in g.chunks(n) {
                        add_into(d, gr);
                    }
                });
                send(*x, &|d| {
                    let nf = n as f64;
                    for (i, gr) in g.chunks(n).enumerate() {
                        let xh = &xhat[i * n..(i + 1) * n];
                        let mut sum_dxh = 0.0;
                        let mut sum_dxh_xh = 0.0;
                        for j in 0..n {
                            let dxh = gr[j] * gv[j];
                            sum_dxh += dxh;
                            sum_dxh_xh += dxh * xh[j];
                        }
                        let inv = inv_std[i];
                        for j in 0..n {
                            let dxh = gr[j] * gv[j];
                            d[i * n + j] += inv / nf * (nf * dxh - sum_dxh - xh[j] * sum_dxh_xh);
                        }
                    }
                });
            }
            Op::Gelu(a, t) => {
                let av = self.value(*a).data();
                send(*a, &|d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * gelu_grad(av[i], t[i]);
                    }
                });
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                send(*a, &|d| {
                    for i in 0..d.len() {
                        d[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                });
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let (m, n) = self.value(*logits).dims2();
                let scale = g[0] / m as f64;
                send(*logits, &|d| {
                    for i in 0..m {
                        for j in 0..n {
                            let onehot = if targets[i] == j { 1.0 } else { 0.0 };
                            d[i * n + j] += scale * (probs[i * n + j] - onehot);
                        }
                    }
                });
            }
            Op::MaskedFill(a, mask) => {
                send(*a, &|d| {
                    for i in 0..d.len() {
                        if !mask[i] {
                            d[i] += g[i];
                        }
                    }
                });
            }
            Op::SliceCols(a, start, end) => {
                let n = self.value(*a).cols();
                let w = end - start;
                send(*a, &|d| {
                    for (i, gr) in g.chunks(w).enumerate() {
                        add_into(&mut d[i * n + start..i * n + end], gr);
                    }
                });
            }
            Op::SliceRows(a, start, end) => {
                let n = self.value(*a).cols();
                send(*a, &|d| add_into(&mut d[start * n..end * n], g));
            }
            Op::ConcatCols(parts) => {
                let n = gout.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    send(p, &|d| {
                        for (i, dr) in d.chunks_mut(w).enumerate() {
                            add_into(dr, &g[i * n + offset..i * n + offset + w]);
                        }
                    });
                    offset += w;
                }
            }
            Op::Mean(a) => {
                let inv = g[0] / self.value(*a).len() as f64;
                send(*a, &|d| d.iter_mut().for_each(|x| *x += inv));
            }
            Op::Sum(a) => {
                send(*a, &|d| d.iter_mut().for_each(|x| *x += g[0]));
            }
            Op::Hinge(a, tau) => {
                let av = self.value(*a).data();
                send(*a, &|d| {
                    for i in 0..d.len() {
                        if tau - av[i] > 0.0 {
                            d[i] -= g[i];
                        }
                    }
                });
            }
            Op::GatherRows(table, ids) => {
                let n = self.value(*table).cols();
                send(*table, &|d| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut d[id * n..(id + 1) * n], &g[r * n..(r + 1) * n]);
                    }
                });
            }
        }
    }
}

#[inline]
fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// `tanh(c (x + 0.044715 x^3))`, via `exp` which is much cheaper than libm `tanh`.
fn gelu_tanh(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    1.0 - 2.0 / ((2.0 * u).exp() + 1.0)
}

fn gelu_grad(x: f64, t: f64) -> f64 {
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> Tensor {
        Tensor::new(vec![1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut g = Graph::new();
        let x = g.constant(row(&[0.0, 0.0]));
        let y = g.softmax(x);
        assert_eq!(g.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn identity_matmul() {
        let m = Tensor::new(vec![3, 3], (0..9).map(|v| v as f64 * 0.7 - 2.0).collect()).unwrap();
        let mut g = Graph::new();
        let i = g.constant(Tensor::eye(3));
        let mv = g.constant(m.clone());
        let out = g.matmul(i, mv).unwrap();
        assert_eq!(g.value(out), &m);
    }

    #[test]
    fn saturated_cross_entropy_is_tiny() {
        let mut g = Graph::new();
        let x = g.constant(row(&[20.0, 0.0]));
        let l = g.cross_entropy(x, &[0]).unwrap();
        assert!(g.value(l).item() < 1e-8);
    }

    #[test]
    fn mean_gradient_is_uniform() {
        let mut g = Graph::new();
        let x = g.param(row(&[1.0, -2.0, 3.0, 0.5]));
        let m = g.mean(x);
        g.backward(m).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[0.25; 4]);
    }

    #[test]
    fn hinge_subgradient() {
        for (x, want) in [(0.25, -1.0), (0.5, 0.0), (0.4, 0.0)] {
            let mut g = Graph::new();
            let v = g.param(Tensor::scalar(x));
            let h = g.hinge(v, 0.4);
            g.backward(h).unwrap();
            assert_eq!(g.grad(v).unwrap().item(), want, "x = {x}");
        }
    }

    #[test]
    fn backward_accumulates() {
        let mut g = Graph::new();
        let x = g.param(row(&[0.3, -1.2, 2.0]));
        let y = g.tanh(x);
        let s = g.sum(y);
        g.backward(s).unwrap();
        let once = g.grad(x).unwrap().clone();
        g.backward(s).unwrap();
        let twice = g.grad(x).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.param(row(&[1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::Shape(_))));
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3] vs [2, 3]"), "{err}");
    }

    #[test]
    fn causal_mask_zeroes_future() {
        let mut g = Graph::new();
        let s = g.constant(Tensor::zeros(&[3, 3]));
        let m = g.causal_mask(s).unwrap();
        let p = g.softmax(m);
        let v = g.value(p);
        assert_eq!(v.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(v.row(1), &[0.5, 0.5, 0.0]);
        assert!((v.row(2).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_branches_get_no_gradient() {
        let mut g = Graph::new();
        let w = g.constant(Tensor::full(&[2, 2], 0.5));
        let x = g.param(Tensor::full(&[1, 2], 1.0));
        let y = g.matmul(x, w).unwrap();
        let l = g.sum(y);
        g.backward(l).unwrap();
        assert!(g.grad(w).is_none());
        assert_eq!(g.grad(x).unwrap().data(), &[1.0, 1.0]);
    }
}
