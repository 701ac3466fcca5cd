//! Define-by-run reverse-mode tape.
//!
//! Backward passes are themselves recorded as tape operations, so a gradient obtained from
//! [`Tape::grad`] is an ordinary [`Var`] that can be differentiated again. The gradient
//! penalty relies on this.

use super::kernels::{self, ConvGeom};
use super::{Real, Tensor};
use crate::error::{contract, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Pow(Var, f64),
    Exp(Var),
    Log(Var),
    Tanh(Var),
    Sigmoid(Var),
    Abs(Var),
    LeakyRelu(Var, f64),
    ClampMin(Var, f64),
    SumTo(Var),
    BroadcastTo(Var),
    Reshape(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Conv2d {
        x: Var,
        w: Var,
        stride: usize,
        pad: usize,
    },
    ConvTranspose {
        x: Var,
        w: Var,
        stride: usize,
        pad: usize,
    },
    ConvWeightGrad {
        x: Var,
        y: Var,
        stride: usize,
        pad: usize,
    },
    Narrow {
        x: Var,
        axis: usize,
        start: usize,
    },
    Embed {
        x: Var,
        axis: usize,
        start: usize,
    },
    Concat {
        parts: Vec<Var>,
        axis: usize,
    },
    CastF16(Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Leaf => vec![],
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | MatMul(a, b) => vec![*a, *b],
            Scale(a, _)
            | Offset(a)
            | Pow(a, _)
            | Exp(a)
            | Log(a)
            | Tanh(a)
            | Sigmoid(a)
            | Abs(a)
            | LeakyRelu(a, _)
            | ClampMin(a, _)
            | SumTo(a)
            | BroadcastTo(a)
            | Reshape(a)
            | Transpose(a)
            | CastF16(a) => vec![*a],
            Conv2d { x, w, .. } | ConvTranspose { x, w, .. } => vec![*x, *w],
            ConvWeightGrad { x, y, .. } => vec![*x, *y],
            Narrow { x, .. } | Embed { x, .. } => vec![*x],
            Concat { parts, .. } => parts.clone(),
        }
    }
}

struct Node<S> {
    value: Tensor<S>,
    op: Op,
    requires_grad: bool,
}

/// A single forward pass worth of recorded operations.
pub struct Tape<S: Real = f32> {
    nodes: Vec<Node<S>>,
}

impl<S: Real> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<S: Real> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable input.
    pub fn leaf(&mut self, t: Tensor<S>) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input that never requires a gradient.
    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.constant(Tensor::scalar(S::lit(v)))
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a single-element variable.
    pub fn item(&self, v: Var) -> Result<S> {
        self.value(v).item()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Total number of elements held by non-leaf nodes.
    pub fn intermediate_elements(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| !matches!(n.op, Op::Leaf))
            .map(|n| n.value.numel())
            .sum()
    }

    fn push(&mut self, value: Tensor<S>, op: Op) -> Var {
        let requires_grad = op.inputs().iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn unary(&mut self, x: Var, op: Op, f: impl Fn(S) -> S) -> Var {
        let value = self.value(x).map(f);
        self.push(value, op)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op, f: impl Fn(S, S) -> S) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out = kernels::broadcast_shape(ta.shape(), tb.shape())?;
        let data = kernels::binary_broadcast(ta.data(), ta.shape(), tb.data(), tb.shape(), &out, f);
        Ok(self.push(Tensor::from_parts(out, data), op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, Op::Div(a, b), |x, y| x / y)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let sv = S::lit(s);
        self.unary(x, Op::Scale(x, s), |v| v * sv)
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    pub fn offset(&mut self, x: Var, c: f64) -> Var {
        let cv = S::lit(c);
        self.unary(x, Op::Offset(x), |v| v + cv)
    }

    pub fn powf(&mut self, x: Var, p: f64) -> Var {
        let pv = S::lit(p);
        self.unary(x, Op::Pow(x, p), |v| v.powf(pv))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.mul(x, x)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, Op::Exp(x), |v| v.exp())
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, Op::Log(x), |v| v.ln())
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Op::Tanh(x), |v| v.tanh())
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Op::Sigmoid(x), |v| S::one() / (S::one() + (-v).exp()))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, Op::Abs(x), |v| v.abs())
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_relu(x, 0.0)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = S::lit(slope);
        self.unary(x, Op::LeakyRelu(x, slope), |v| {
            if v > S::zero() {
                v
            } else {
                v * s
            }
        })
    }

    pub fn clamp_min(&mut self, x: Var, lo: f64) -> Var {
        let l = S::lit(lo);
        self.unary(x, Op::ClampMin(x, lo), |v| if v > l { v } else { l })
    }

    /// Sums over every dimension where `target` has extent 1 (or everything for a scalar target).
    pub fn sum_to(&mut self, x: Var, target: &[usize]) -> Result<Var> {
        let t = self.value(x);
        kernels::check_reducible(t.shape(), target)?;
        let data = kernels::sum_to(t.data(), t.shape(), target);
        Ok(self.push(Tensor::from_parts(target.to_vec(), data), Op::SumTo(x)))
    }

    pub fn broadcast_to(&mut self, x: Var, target: &[usize]) -> Result<Var> {
        let t = self.value(x);
        kernels::check_reducible(target, t.shape())?;
        let data = kernels::broadcast_to(t.data(), t.shape(), target);
        Ok(self.push(
            Tensor::from_parts(target.to_vec(), data),
            Op::BroadcastTo(x),
        ))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.sum_to(x, &[])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).numel();
        let s = self.sum(x)?;
        Ok(self.scale(s, 1.0 / n as f64))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        Ok(self.push(t, Op::Reshape(x)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        contract!(
            sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0],
            "matmul shape mismatch: {sa:?} x {sb:?}"
        );
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = kernels::matmul(ta.data(), tb.data(), m, k, n);
        Ok(self.push(Tensor::from_parts(vec![m, n], data), Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        contract!(
            t.shape().len() == 2,
            "transpose needs a matrix, got {:?}",
            t.shape()
        );
        let (r, c) = (t.shape()[0], t.shape()[1]);
        let data = kernels::transpose(t.data(), r, c);
        Ok(self.push(Tensor::from_parts(vec![c, r], data), Op::Transpose(x)))
    }

    /// Zero-padded cross-correlation. `x: N×C×H×W`, `w: F×C×kh×kw`.
    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var> {
        let g = ConvGeom::forward(self.shape(x), self.shape(w), stride, pad)?;
        let data = kernels::conv2d(self.value(x).data(), self.value(w).data(), &g);
        Ok(self.push(
            Tensor::from_parts(g.y_shape(), data),
            Op::Conv2d { x, w, stride, pad },
        ))
    }

    /// Transposed convolution (the input-gradient of [`Tape::conv2d`]).
    ///
    /// `x: N×F×H×W`, `w: F×C×kh×kw`; output extent `(H−1)·stride − 2·pad + kh`.
    pub fn conv_transpose(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var> {
        self.conv_transpose_to(x, w, stride, pad, None)
    }

    pub fn conv_transpose_to(
        &mut self,
        x: Var,
        w: Var,
        stride: usize,
        pad: usize,
        out_hw: Option<(usize, usize)>,
    ) -> Result<Var> {
        let g = ConvGeom::transpose(self.shape(x), self.shape(w), stride, pad, out_hw)?;
        let data = kernels::conv_transpose(self.value(x).data(), self.value(w).data(), &g);
        Ok(self.push(
            Tensor::from_parts(g.x_shape(), data),
            Op::ConvTranspose { x, w, stride, pad },
        ))
    }

    /// Weight-gradient of conv2d: correlates input `x` with output-shaped `y`.
    pub fn conv_weight_grad(
        &mut self,
        x: Var,
        y: Var,
        kernel: (usize, usize),
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let (sx, sy) = (self.shape(x).to_vec(), self.shape(y).to_vec());
        contract!(
            sx.len() == 4 && sy.len() == 4 && sx[0] == sy[0],
            "conv_weight_grad shape mismatch: {sx:?} vs {sy:?}"
        );
        let wshape = [sy[1], sx[1], kernel.0, kernel.1];
        let g = ConvGeom::forward(&sx, &wshape, stride, pad)?;
        contract!(
            g.oh == sy[2] && g.ow == sy[3],
            "conv_weight_grad output {sy:?} inconsistent with input {sx:?}"
        );
        let data = kernels::conv_weight_grad(self.value(x).data(), self.value(y).data(), &g);
        Ok(self.push(
            Tensor::from_parts(g.w_shape(), data),
            Op::ConvWeightGrad { x, y, stride, pad },
        ))
    }

    /// Slice `len` entries starting at `start` along `axis`.
    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        let shape = t.shape().to_vec();
        contract!(
            axis < shape.len() && len > 0 && start + len <= shape[axis],
            "narrow({axis}, {start}, {len}) out of range for {shape:?}"
        );
        let (outer, full, inner) = axis_split(&shape, axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            data.extend_from_slice(&t.data()[base..base + len * inner]);
        }
        let mut out = shape;
        out[axis] = len;
        Ok(self.push(Tensor::from_parts(out, data), Op::Narrow { x, axis, start }))
    }

    /// Places `x` at `start` along `axis` inside zeros of extent `full`; adjoint of narrow.
    pub fn embed(&mut self, x: Var, axis: usize, start: usize, full: usize) -> Result<Var> {
        let t = self.value(x);
        let shape = t.shape().to_vec();
        contract!(
            axis < shape.len() && start + shape[axis] <= full,
            "embed at {start} of extent {full} out of range for {shape:?}"
        );
        let (outer, len, inner) = axis_split(&shape, axis);
        let mut data = vec![S::zero(); outer * full * inner];
        for o in 0..outer {
            let dst = (o * full + start) * inner;
            data[dst..dst + len * inner]
                .copy_from_slice(&t.data()[o * len * inner..(o + 1) * len * inner]);
        }
        let mut out = shape;
        out[axis] = full;
        Ok(self.push(Tensor::from_parts(out, data), Op::Embed { x, axis, start }))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        contract!(!parts.is_empty(), "concat of zero tensors");
        let first = self.shape(parts[0]).to_vec();
        contract!(
            axis < first.len(),
            "concat axis {axis} out of range for {first:?}"
        );
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            contract!(
                s.len() == first.len()
                    && s.iter()
                        .zip(&first)
                        .enumerate()
                        .all(|(d, (a, b))| d == axis || a == b),
                "concat shape mismatch: {first:?} vs {s:?} on axis {axis}"
            );
            total += s[axis];
        }
        let (outer, _, inner) = axis_split(&first, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &p in parts {
                let t = self.value(p);
                let len = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * len..(o + 1) * len]);
            }
        }
        let mut out = first;
        out[axis] = total;
        Ok(self.push(
            Tensor::from_parts(out, data),
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
        ))
    }

    /// Rounds to binary16; the backward pass rounds the incoming gradient the same way.
    pub fn cast_f16(&mut self, x: Var) -> Var {
        let value = self.value(x).to_fp16();
        self.push(value, Op::CastF16(x))
    }

    fn mask(&mut self, x: Var, f: impl Fn(S) -> S) -> Var {
        let m = self.value(x).map(f);
        self.constant(m)
    }

    /// Reduces a broadcast gradient back to the shape of `like`.
    fn unbroadcast(&mut self, g: Var, like: Var) -> Result<Var> {
        if self.shape(g) == self.shape(like) {
            return Ok(g);
        }
        let target = self.shape(like).to_vec();
        let r = self.sum_to(g, &target)?;
        if self.shape(r) != target.as_slice() {
            return self.reshape(r, &target);
        }
        Ok(r)
    }

    /// Gradient contributions of node `id` given its output gradient `g`.
    fn backprop(&mut self, id: usize, g: Var, needed: &[bool]) -> Result<Vec<(Var, Var)>> {
        let op = self.nodes[id].op.clone();
        let y = Var(id);
        let need = |v: &Var| needed[v.0];
        let mut out = Vec::new();
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if need(&a) {
                    out.push((a, self.unbroadcast(g, a)?));
                }
                if need(&b) {
                    out.push((b, self.unbroadcast(g, b)?));
                }
            }
            Op::Sub(a, b) => {
                if need(&a) {
                    out.push((a, self.unbroadcast(g, a)?));
                }
                if need(&b) {
                    let ng = self.neg(g);
                    out.push((b, self.unbroadcast(ng, b)?));
                }
            }
            Op::Mul(a, b) => {
                if need(&a) {
                    let t = self.mul(g, b)?;
                    out.push((a, self.unbroadcast(t, a)?));
                }
                if need(&b) {
                    let t = self.mul(g, a)?;
                    out.push((b, self.unbroadcast(t, b)?));
                }
            }
            Op::Div(a, b) => {
                if need(&a) {
                    let t = self.div(g, b)?;
                    out.push((a, self.unbroadcast(t, a)?));
                }
                if need(&b) {
                    let gy = self.mul(g, y)?;
                    let t = self.div(gy, b)?;
                    let t = self.neg(t);
                    out.push((b, self.unbroadcast(t, b)?));
                }
            }
            Op::Scale(a, s) => out.push((a, self.scale(g, s))),
            Op::Offset(a) => out.push((a, g)),
            Op::Pow(a, p) => {
                let d = self.powf(a, p - 1.0);
                let d = self.scale(d, p);
                out.push((a, self.mul(g, d)?));
            }
            Op::Exp(a) => out.push((a, self.mul(g, y)?)),
            Op::Log(a) => out.push((a, self.div(g, a)?)),
            Op::Tanh(a) => {
                let yy = self.mul(y, y)?;
                let d = self.scale(yy, -1.0);
                let d = self.offset(d, 1.0);
                out.push((a, self.mul(g, d)?));
            }
            Op::Sigmoid(a) => {
                let one_minus = self.scale(y, -1.0);
                let one_minus = self.offset(one_minus, 1.0);
                let d = self.mul(y, one_minus)?;
                out.push((a, self.mul(g, d)?));
            }
            Op::Abs(a) => {
                let m = self.mask(a, |v| {
                    if v > S::zero() {
                        S::one()
                    } else if v < S::zero() {
                        -S::one()
                    } else {
                        S::zero()
                    }
                });
                out.push((a, self.mul(g, m)?));
            }
            Op::LeakyRelu(a, slope) => {
                let s = S::lit(slope);
                let m = self.mask(a, |v| if v > S::zero() { S::one() } else { s });
                out.push((a, self.mul(g, m)?));
            }
            Op::ClampMin(a, lo) => {
                let l = S::lit(lo);
                let m = self.mask(a, |v| if v > l { S::one() } else { S::zero() });
                out.push((a, self.mul(g, m)?));
            }
            Op::SumTo(a) => {
                let target = self.shape(a).to_vec();
                let gs = self.shape(g).to_vec();
                let g2 = if gs.len() != target.len() {
                    let ones = vec![1; target.len()];
                    self.reshape(g, &ones)?
                } else {
                    g
                };
                out.push((a, self.broadcast_to(g2, &target)?));
            }
            Op::BroadcastTo(a) => out.push((a, self.unbroadcast(g, a)?)),
            Op::Reshape(a) => {
                let s = self.shape(a).to_vec();
                out.push((a, self.reshape(g, &s)?));
            }
            Op::MatMul(a, b) => {
                if need(&a) {
                    let bt = self.transpose(b)?;
                    out.push((a, self.matmul(g, bt)?));
                }
                if need(&b) {
                    let at = self.transpose(a)?;
                    out.push((b, self.matmul(at, g)?));
                }
            }
            Op::Transpose(a) => out.push((a, self.transpose(g)?)),
            Op::Conv2d { x, w, stride, pad } => {
                if need(&x) {
                    let s = self.shape(x).to_vec();
                    out.push((
                        x,
                        self.conv_transpose_to(g, w, stride, pad, Some((s[2], s[3])))?,
                    ));
                }
                if need(&w) {
                    let s = self.shape(w).to_vec();
                    out.push((w, self.conv_weight_grad(x, g, (s[2], s[3]), stride, pad)?));
                }
            }
            Op::ConvTranspose { x, w, stride, pad } => {
                if need(&x) {
                    out.push((x, self.conv2d(g, w, stride, pad)?));
                }
                if need(&w) {
                    let s = self.shape(w).to_vec();
                    out.push((w, self.conv_weight_grad(g, x, (s[2], s[3]), stride, pad)?));
                }
            }
            Op::ConvWeightGrad {
                x,
                y: dy,
                stride,
                pad,
            } => {
                if need(&x) {
                    let s = self.shape(x).to_vec();
                    out.push((
                        x,
                        self.conv_transpose_to(dy, g, stride, pad, Some((s[2], s[3])))?,
                    ));
                }
                if need(&dy) {
                    out.push((dy, self.conv2d(x, g, stride, pad)?));
                }
            }
            Op::Narrow { x, axis, start } => {
                let full = self.shape(x)[axis];
                out.push((x, self.embed(g, axis, start, full)?));
            }
            Op::Embed { x, axis, start } => {
                let len = self.shape(x)[axis];
                out.push((x, self.narrow(g, axis, start, len)?));
            }
            Op::Concat { parts, axis } => {
                let mut start = 0;
                for p in parts {
                    let len = self.shape(p)[axis];
                    if need(&p) {
                        out.push((p, self.narrow(g, axis, start, len)?));
                    }
                    start += len;
                }
            }
            Op::CastF16(a) => out.push((a, self.cast_f16(g))),
        }
        Ok(out.into_iter().filter(|(v, _)| needed[v.0]).collect())
    }

    /// Gradients of the scalar `output` with respect to `wrt`, recorded as new tape variables.
    ///
    /// Variables that `output` does not depend on receive zero gradients.
    pub fn grad(&mut self, output: Var, wrt: &[Var]) -> Result<Vec<Var>> {
        contract!(
            self.value(output).numel() == 1,
            "backward needs a scalar loss, got shape {:?}",
            self.shape(output)
        );
        let n = output.0 + 1;
        let mut needed = vec![false; n];
        for w in wrt {
            if w.0 < n {
                needed[w.0] = true;
            }
        }
        for id in 0..n {
            if !needed[id] {
                needed[id] = self.nodes[id].op.inputs().iter().any(|i| needed[i.0]);
            }
        }
        let mut grads: Vec<Option<Var>> = vec![None; n];
        if needed[output.0] {
            let seed = Tensor::ones(self.shape(output));
            grads[output.0] = Some(self.constant(seed));
        }
        for id in (0..n).rev() {
            let Some(g) = grads[id] else { continue };
            if !needed[id] {
                continue;
            }
            for (input, gi) in self.backprop(id, g, &needed)? {
                grads[input.0] = Some(match grads[input.0] {
                    Some(prev) => self.add(prev, gi)?,
                    None => gi,
                });
            }
        }
        wrt.iter()
            .map(|w| match grads.get(w.0).copied().flatten() {
                Some(g) => Ok(g),
                None => {
                    let z = Tensor::zeros(self.shape(*w));
                    Ok(self.constant(z))
                }
            })
            .collect()
    }

    /// Gradient values of `loss` with respect to `params`.
    pub fn backward(&mut self, loss: Var, params: &[Var]) -> Result<Vec<Tensor<S>>> {
        let gs = self.grad(loss, params)?;
        Ok(gs.iter().map(|g| self.value(*g).clone()).collect())
    }
}
