use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Reduce down each column.
    Rows,
    /// Reduce along each row.
    Cols,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Log(Var),
    Sigmoid(Var),
    Sum(Var),
    Mean(Var),
    Softmax(Var, Axis),
    LogSoftmax(Var, Axis),
    Mse(Var, Var),
    Transpose(Var),
    SliceCols(Var, usize),
    ConcatCols(Var, Var),
    Clamp(Var, f64, f64),
    Minimum(Var, Var),
    AddN(Vec<Var>),
    Stack(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Append-only record of a computation. Node order is a topological order,
/// so the backward pass is a single reverse sweep.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}

/// Row-wise (or column-wise) softmax of a rank-2 tensor.
fn softmax_values(x: &Tensor, axis: Axis, log: bool) -> Result<Tensor> {
    let (r, c) = x.dims2()?;
    let mut out = x.clone();
    let (outer, inner, idx): (usize, usize, Box<dyn Fn(usize, usize) -> usize>) = match axis {
        Axis::Cols => (r, c, Box::new(move |o, i| o * c + i)),
        Axis::Rows => (c, r, Box::new(move |o, i| i * c + o)),
    };
    let d = out.data_mut();
    for o in 0..outer {
        let max = (0..inner).map(|i| d[idx(o, i)]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = (0..inner).map(|i| (d[idx(o, i)] - max).exp()).sum();
        let lz = z.ln();
        for i in 0..inner {
            let k = idx(o, i);
            d[k] = if log { d[k] - max - lz } else { (d[k] - max).exp() / z };
        }
    }
    Ok(out)
}

fn lanes(shape: &[usize], axis: Axis) -> (usize, usize, usize, usize) {
    // (outer, inner, outer_stride, inner_stride)
    let (r, c) = (shape[0], shape[1]);
    match axis {
        Axis::Cols => (r, c, c, 1),
        Axis::Rows => (c, r, 1, c),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(Tensor::scalar(v))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn item(&self, v: Var) -> f64 {
        self.nodes[v.0].value.item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss with respect to `v`; `None` for
    /// values that do not require gradients.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(x).map(f);
        let rg = self.rg(&[x]);
        self.push(value, op, rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta, tb));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    /// `a (n×m) + b (1×m)`, broadcasting `b` over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (_, m) = ta.dims2()?;
        if tb.shape() != [1, m] {
            return Err(shape_err("add_row", ta, tb));
        }
        let mut value = ta.clone();
        for row in value.data_mut().chunks_mut(m) {
            for (x, y) in row.iter_mut().zip(tb.data()) {
                *x += y;
            }
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::AddRow(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::Scale(x, c), |v| v * c)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, Op::AddScalar(x), |v| v + c)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), f64::tanh)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Op::Relu(x), |v| v.max(0.0))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), f64::exp)
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, Op::Log(x), f64::ln)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), |v| {
            if v >= 0.0 {
                1.0 / (1.0 + (-v).exp())
            } else {
                let e = v.exp();
                e / (1.0 + e)
            }
        })
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        self.unary(x, Op::Clamp(x, lo, hi), |v| v.clamp(lo, hi))
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("minimum", a, b)?;
        let value = zip_map(self.value(a), self.value(b), |x, y| if x <= y { x } else { y });
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::Minimum(a, b), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    pub fn softmax(&mut self, x: Var, axis: Axis) -> Result<Var> {
        let value = softmax_values(self.value(x), axis, false)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::Softmax(x, axis), rg))
    }

    pub fn log_softmax(&mut self, x: Var, axis: Axis) -> Result<Var> {
        let value = softmax_values(self.value(x), axis, true)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::LogSoftmax(x, axis), rg))
    }

    /// Mean squared difference.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mse", a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let n = ta.numel() as f64;
        let s = ta.data().iter().zip(tb.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::scalar(s), Op::Mse(a, b), rg))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).transpose()?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::Transpose(x), rg))
    }

    /// Columns `start..start + len` of a rank-2 tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = t.dims2()?;
        if start + len > c {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: t.shape().to_vec(),
                rhs: vec![start, len],
            });
        }
        let data = (0..r)
            .flat_map(|i| t.data()[i * c + start..i * c + start + len].iter().copied())
            .collect();
        let value = Tensor::new(vec![r, len], data)?;
        let rg = self.rg(&[x]);
        Ok(self.push(value, Op::SliceCols(x, start), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (ra, ca) = ta.dims2()?;
        let (rb, cb) = tb.dims2()?;
        if ra != rb {
            return Err(shape_err("concat_cols", ta, tb));
        }
        let mut data = Vec::with_capacity(ra * (ca + cb));
        for i in 0..ra {
            data.extend_from_slice(&ta.data()[i * ca..(i + 1) * ca]);
            data.extend_from_slice(&tb.data()[i * cb..(i + 1) * cb]);
        }
        let value = Tensor::new(vec![ra, ca + cb], data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    /// Sum of several same-shape values.
    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or_else(|| Error::Contract("add_n of nothing".into()))?;
        let mut acc = self.value(first).clone();
        for &x in &xs[1..] {
            let t = self.value(x);
            if t.shape() != acc.shape() {
                return Err(shape_err("add_n", &acc, t));
            }
            for (a, b) in acc.data_mut().iter_mut().zip(t.data()) {
                *a += b;
            }
        }
        let rg = self.rg(xs);
        Ok(self.push(acc, Op::AddN(xs.to_vec()), rg))
    }

    /// Gather one-element values into a `1 × n` row.
    pub fn stack(&mut self, xs: &[Var]) -> Result<Var> {
        let mut data = Vec::with_capacity(xs.len());
        for &x in xs {
            let t = self.value(x);
            if t.numel() != 1 {
                return Err(Error::Shape { op: "stack", lhs: t.shape().to_vec(), rhs: vec![1] });
            }
            data.push(t.data()[0]);
        }
        if data.is_empty() {
            return Err(Error::Contract("stack of nothing".into()));
        }
        let value = Tensor::new(vec![1, data.len()], data)?;
        let rg = self.rg(xs);
        Ok(self.push(value, Op::Stack(xs.to_vec()), rg))
    }

    /// `softmax(Q Kᵀ / √d_k) V`.
    pub fn scaled_dot_attention(&mut self, q: Var, k: Var, v: Var, d_k: usize) -> Result<Var> {
        let (nq, dq) = self.value(q).dims2()?;
        let (nk, dk) = self.value(k).dims2()?;
        let (nv, _) = self.value(v).dims2()?;
        if dq != dk || dq != d_k {
            return Err(shape_err("attention(q, k)", self.value(q), self.value(k)));
        }
        if nk != nv {
            return Err(shape_err("attention(k, v)", self.value(k), self.value(v)));
        }
        let _ = nq;
        let kt = self.transpose(k)?;
        let scores = self.matmul(q, kt)?;
        let scaled = self.scale(scores, 1.0 / (d_k as f64).sqrt());
        let weights = self.softmax(scaled, Axis::Cols)?;
        self.matmul(weights, v)
    }

    /// Reverse sweep from a one-element `loss`. Gradients from any earlier
    /// call are discarded; afterwards every value that requires gradients
    /// holds one (zeros when the loss does not depend on it).
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lt = self.value(loss);
        if lt.numel() != 1 {
            return Err(Error::Shape {
                op: "backward (loss must be scalar)",
                lhs: lt.shape().to_vec(),
                rhs: vec![],
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        for (idx, node) in self.nodes.iter_mut().enumerate() {
            node.grad = if node.requires_grad {
                let shape = node.value.shape().to_vec();
                let data = grads
                    .get_mut(idx)
                    .and_then(Option::take)
                    .unwrap_or_else(|| vec![0.0; node.value.numel()]);
                Some(Tensor::new(shape, data)?)
            } else {
                None
            };
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let node = &self.nodes[idx];
        let y = node.value.data();
        let mut acc = |v: Var, contrib: &dyn Fn(usize) -> f64, n: usize| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; n]);
            for (i, s) in slot.iter_mut().enumerate() {
                *s += contrib(i);
            }
        };
        let val = |v: Var| self.nodes[v.0].value.data();
        let numel = |v: Var| self.nodes[v.0].value.numel();

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ta = &self.nodes[a.0].value;
                let tb = &self.nodes[b.0].value;
                let gt = Tensor::new(node.value.shape().to_vec(), g.to_vec())?;
                if self.nodes[a.0].requires_grad {
                    let ga = gt.matmul(&tb.transpose()?)?;
                    acc(*a, &|i| ga.data()[i], ta.numel());
                }
                if self.nodes[b.0].requires_grad {
                    let gb = ta.transpose()?.matmul(&gt)?;
                    acc(*b, &|i| gb.data()[i], tb.numel());
                }
            }
            Op::Add(a, b) => {
                acc(*a, &|i| g[i], g.len());
                acc(*b, &|i| g[i], g.len());
            }
            Op::AddRow(a, b) => {
                acc(*a, &|i| g[i], g.len());
                let m = numel(*b);
                let mut col = vec![0.0; m];
                for row in g.chunks(m) {
                    for (c, v) in col.iter_mut().zip(row) {
                        *c += v;
                    }
                }
                acc(*b, &|i| col[i], m);
            }
            Op::Sub(a, b) => {
                acc(*a, &|i| g[i], g.len());
                acc(*b, &|i| -g[i], g.len());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &|i| g[i] * vb[i], g.len());
                acc(*b, &|i| g[i] * va[i], g.len());
            }
            Op::Scale(x, c) => acc(*x, &|i| g[i] * c, g.len()),
            Op::AddScalar(x) => acc(*x, &|i| g[i], g.len()),
            Op::Tanh(x) => acc(*x, &|i| g[i] * (1.0 - y[i] * y[i]), g.len()),
            Op::Relu(x) => {
                let vx = val(*x);
                acc(*x, &|i| if vx[i] > 0.0 { g[i] } else { 0.0 }, g.len())
            }
            Op::Exp(x) => acc(*x, &|i| g[i] * y[i], g.len()),
            Op::Log(x) => {
                let vx = val(*x);
                acc(*x, &|i| g[i] / vx[i], g.len())
            }
            Op::Sigmoid(x) => acc(*x, &|i| g[i] * y[i] * (1.0 - y[i]), g.len()),
            Op::Clamp(x, lo, hi) => {
                let vx = val(*x);
                acc(*x, &|i| if vx[i] >= *lo && vx[i] <= *hi { g[i] } else { 0.0 }, g.len())
            }
            Op::Minimum(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &|i| if va[i] <= vb[i] { g[i] } else { 0.0 }, g.len());
                acc(*b, &|i| if va[i] <= vb[i] { 0.0 } else { g[i] }, g.len());
            }
            Op::Sum(x) => acc(*x, &|_| g[0], numel(*x)),
            Op::Mean(x) => {
                let n = numel(*x);
                acc(*x, &|_| g[0] / n as f64, n)
            }
            Op::Softmax(x, axis) => {
                let (outer, inner, os, is) = lanes(node.value.shape(), *axis);
                let mut gx = vec![0.0; y.len()];
                for o in 0..outer {
                    let dot: f64 = (0..inner).map(|i| g[o * os + i * is] * y[o * os + i * is]).sum();
                    for i in 0..inner {
                        let k = o * os + i * is;
                        gx[k] = y[k] * (g[k] - dot);
                    }
                }
                acc(*x, &|i| gx[i], gx.len());
            }
            Op::LogSoftmax(x, axis) => {
                let (outer, inner, os, is) = lanes(node.value.shape(), *axis);
                let mut gx = vec![0.0; y.len()];
                for o in 0..outer {
                    let total: f64 = (0..inner).map(|i| g[o * os + i * is]).sum();
                    for i in 0..inner {
                        let k = o * os + i * is;
                        gx[k] = g[k] - y[k].exp() * total;
                    }
                }
                acc(*x, &|i| gx[i], gx.len());
            }
            Op::Mse(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let n = va.len() as f64;
                acc(*a, &|i| g[0] * 2.0 * (va[i] - vb[i]) / n, va.len());
                acc(*b, &|i| -g[0] * 2.0 * (va[i] - vb[i]) / n, va.len());
            }
            Op::Transpose(x) => {
                let gt = Tensor::new(node.value.shape().to_vec(), g.to_vec())?.transpose()?;
                acc(*x, &|i| gt.data()[i], gt.numel());
            }
            Op::SliceCols(x, start) => {
                let (r, c) = self.nodes[x.0].value.dims2()?;
                let len = node.value.shape()[1];
                let mut gx = vec![0.0; r * c];
                for i in 0..r {
                    gx[i * c + start..i * c + start + len].copy_from_slice(&g[i * len..(i + 1) * len]);
                }
                acc(*x, &|i| gx[i], gx.len());
            }
            Op::ConcatCols(a, b) => {
                let (r, ca) = self.nodes[a.0].value.dims2()?;
                let cb = self.nodes[b.0].value.shape()[1];
                let w = ca + cb;
                acc(*a, &|i| g[(i / ca) * w + i % ca], r * ca);
                acc(*b, &|i| g[(i / cb) * w + ca + i % cb], r * cb);
            }
            Op::AddN(xs) => {
                for x in xs {
                    acc(*x, &|i| g[i], g.len());
                }
            }
            Op::Stack(xs) => {
                for (k, x) in xs.iter().enumerate() {
                    acc(*x, &|_| g[k], 1);
                }
            }
        }
        Ok(())
    }
}
