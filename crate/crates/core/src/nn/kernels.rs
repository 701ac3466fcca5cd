//! Raw numeric kernels over flat row-major slices.

use super::tensor::numel;
use super::Real;
use crate::error::{contract, Result};
use crate::par;

/// Geometry shared by the conv2d family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

fn out_extent(size: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = size + 2 * pad;
    if padded < k {
        return None;
    }
    Some((padded - k) / stride + 1)
}

impl ConvGeom {
    /// Geometry of `conv2d(x, w)` with `x: N×C×H×W`, `w: F×C×kh×kw`.
    pub fn forward(x: &[usize], w: &[usize], stride: usize, pad: usize) -> Result<Self> {
        contract!(
            x.len() == 4 && w.len() == 4,
            "conv2d expects 4-d input and weight, got {x:?} and {w:?}"
        );
        contract!(stride >= 1, "conv2d stride must be >= 1");
        contract!(
            x[1] == w[1],
            "conv2d channel mismatch: input {x:?}, weight {w:?}"
        );
        let oh = out_extent(x[2], w[2], stride, pad);
        let ow = out_extent(x[3], w[3], stride, pad);
        let (Some(oh), Some(ow)) = (oh, ow) else {
            return Err(crate::Error::Contract(format!(
                "conv2d kernel {w:?} larger than padded input {x:?} (pad {pad})"
            )));
        };
        Ok(ConvGeom {
            n: x[0],
            c: x[1],
            h: x[2],
            w: x[3],
            f: w[0],
            kh: w[2],
            kw: w[3],
            stride,
            pad,
            oh,
            ow,
        })
    }

    /// Geometry of the adjoint `conv_transpose(g, w)` with `g: N×F×H'×W'`.
    ///
    /// `out_hw` pins the spatial size of the result; otherwise `(H'−1)·stride − 2·pad + k`.
    pub fn transpose(
        g: &[usize],
        w: &[usize],
        stride: usize,
        pad: usize,
        out_hw: Option<(usize, usize)>,
    ) -> Result<Self> {
        contract!(
            g.len() == 4 && w.len() == 4,
            "conv_transpose expects 4-d input and weight, got {g:?} and {w:?}"
        );
        contract!(stride >= 1, "conv_transpose stride must be >= 1");
        contract!(
            g[1] == w[0],
            "conv_transpose channel mismatch: input {g:?}, weight {w:?}"
        );
        let (h, wd) = match out_hw {
            Some(hw) => hw,
            None => {
                let h = ((g[2] - 1) * stride + w[2]) as isize - 2 * pad as isize;
                let wd = ((g[3] - 1) * stride + w[3]) as isize - 2 * pad as isize;
                contract!(
                    h > 0 && wd > 0,
                    "conv_transpose output extent non-positive for input {g:?}, weight {w:?}"
                );
                (h as usize, wd as usize)
            }
        };
        let geom = ConvGeom::forward(&[g[0], w[1], h, wd], w, stride, pad)?;
        contract!(
            geom.oh == g[2] && geom.ow == g[3],
            "conv_transpose input {g:?} inconsistent with output {h}x{wd}"
        );
        Ok(geom)
    }

    pub fn ckk(&self) -> usize {
        self.c * self.kh * self.kw
    }

    pub fn ohw(&self) -> usize {
        self.oh * self.ow
    }

    pub fn x_shape(&self) -> Vec<usize> {
        vec![self.n, self.c, self.h, self.w]
    }

    pub fn y_shape(&self) -> Vec<usize> {
        vec![self.n, self.f, self.oh, self.ow]
    }

    pub fn w_shape(&self) -> Vec<usize> {
        vec![self.f, self.c, self.kh, self.kw]
    }
}

/// `c[m×n] = a[m×k] · b[k×n]`.
pub(crate) fn matmul<S: Real>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut c = vec![S::zero(); m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// `c[m×n] = aᵀ · b` for `a[k×m]`, `b[k×n]`.
pub(crate) fn matmul_tn<S: Real>(a: &[S], b: &[S], k: usize, m: usize, n: usize) -> Vec<S> {
    let mut c = vec![S::zero(); m * n];
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            let crow = &mut c[i * n..(i + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    c
}

pub(crate) fn transpose<S: Real>(a: &[S], rows: usize, cols: usize) -> Vec<S> {
    let mut t = vec![S::zero(); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = a[r * cols + c];
        }
    }
    t
}

fn im2col<S: Real>(x: &[S], g: &ConvGeom) -> Vec<S> {
    let ohw = g.ohw();
    let mut cols = vec![S::zero(); g.ckk() * ohw];
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &mut cols[((c * g.kh + i) * g.kw + j) * ohw..][..ohw];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + j) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            row[oy * g.ow + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<S: Real>(cols: &[S], g: &ConvGeom, x: &mut [S]) {
    let ohw = g.ohw();
    for c in 0..g.c {
        let plane = &mut x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &cols[((c * g.kh + i) * g.kw + j) * ohw..][..ohw];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + j) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += row[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation with zero padding; output `N×F×OH×OW`.
pub(crate) fn conv2d<S: Real>(x: &[S], w: &[S], g: &ConvGeom) -> Vec<S> {
    let xs = g.c * g.h * g.w;
    let per = par::map_range(g.n, |n| {
        let cols = im2col(&x[n * xs..(n + 1) * xs], g);
        matmul(w, &cols, g.f, g.ckk(), g.ohw())
    });
    per.concat()
}

/// Adjoint of [`conv2d`] with respect to its input: maps `N×F×OH×OW` to `N×C×H×W`.
pub(crate) fn conv_transpose<S: Real>(y: &[S], w: &[S], g: &ConvGeom) -> Vec<S> {
    let ys = g.f * g.ohw();
    let xs = g.c * g.h * g.w;
    let per = par::map_range(g.n, |n| {
        let cols = matmul_tn(w, &y[n * ys..(n + 1) * ys], g.f, g.ckk(), g.ohw());
        let mut xn = vec![S::zero(); xs];
        col2im(&cols, g, &mut xn);
        xn
    });
    per.concat()
}

/// Adjoint of [`conv2d`] with respect to its weight: `Σₙ yₙ · im2col(xₙ)ᵀ`, summed in sample order.
pub(crate) fn conv_weight_grad<S: Real>(x: &[S], y: &[S], g: &ConvGeom) -> Vec<S> {
    let xs = g.c * g.h * g.w;
    let ys = g.f * g.ohw();
    let per = par::map_range(g.n, |n| {
        let cols = im2col(&x[n * xs..(n + 1) * xs], g);
        let cols_t = transpose(&cols, g.ckk(), g.ohw());
        matmul(&y[n * ys..(n + 1) * ys], &cols_t, g.f, g.ohw(), g.ckk())
    });
    let mut acc = vec![S::zero(); g.f * g.ckk()];
    for part in per {
        for (a, p) in acc.iter_mut().zip(part) {
            *a += p;
        }
    }
    acc
}

/// Numpy-style broadcast of two equal-rank shapes.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    if a == b {
        return Ok(a.to_vec());
    }
    if a.is_empty() {
        return Ok(b.to_vec());
    }
    if b.is_empty() {
        return Ok(a.to_vec());
    }
    contract!(
        a.len() == b.len(),
        "cannot broadcast shapes {a:?} and {b:?} (rank differs)"
    );
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Ok(x),
            (1, _) => Ok(y),
            (_, 1) => Ok(x),
            _ => Err(crate::Error::Contract(format!(
                "cannot broadcast shapes {a:?} and {b:?}"
            ))),
        })
        .collect()
}

/// Strides of `shape` viewed inside `out`, with 0 on broadcast dimensions.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    if shape.is_empty() {
        return vec![0; out.len()];
    }
    let mut strides = vec![0; out.len()];
    let mut acc = 1;
    for d in (0..shape.len()).rev() {
        strides[d] = if shape[d] == 1 && out[d] != 1 { 0 } else { acc };
        acc *= shape[d];
    }
    strides
}

/// Calls `f(out_offset, a_offset, b_offset, len, a_step, b_step)` once per innermost row of `out`.
fn for_each_row(
    out: &[usize],
    sa: &[usize],
    sb: &[usize],
    mut f: impl FnMut(usize, usize, usize, usize, usize, usize),
) {
    if out.is_empty() {
        f(0, 0, 0, 1, 0, 0);
        return;
    }
    let rank = out.len();
    let len = out[rank - 1];
    let rows = numel(out) / len;
    let mut idx = vec![0usize; rank - 1];
    let (mut oa, mut ob) = (0usize, 0usize);
    for r in 0..rows {
        f(r * len, oa, ob, len, sa[rank - 1], sb[rank - 1]);
        for d in (0..rank - 1).rev() {
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < out[d] {
                break;
            }
            oa -= sa[d] * out[d];
            ob -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

pub(crate) fn binary_broadcast<S: Real>(
    a: &[S],
    ashape: &[usize],
    b: &[S],
    bshape: &[usize],
    out: &[usize],
    op: impl Fn(S, S) -> S,
) -> Vec<S> {
    if ashape == bshape {
        return a.iter().zip(b).map(|(&x, &y)| op(x, y)).collect();
    }
    let sa = broadcast_strides(ashape, out);
    let sb = broadcast_strides(bshape, out);
    let mut res = vec![S::zero(); numel(out)];
    for_each_row(out, &sa, &sb, |o, oa, ob, len, da, db| {
        for i in 0..len {
            res[o + i] = op(a[oa + i * da], b[ob + i * db]);
        }
    });
    res
}

/// Sums `x` down to `target`, which must be a broadcast-compatible reduction of `xshape`.
pub(crate) fn sum_to<S: Real>(x: &[S], xshape: &[usize], target: &[usize]) -> Vec<S> {
    if xshape == target {
        return x.to_vec();
    }
    if target.is_empty() || numel(target) == 1 {
        return vec![x.iter().copied().sum()];
    }
    let st = broadcast_strides(target, xshape);
    let sx = broadcast_strides(xshape, xshape);
    let mut res = vec![S::zero(); numel(target)];
    for_each_row(xshape, &sx, &st, |_, ox, ot, len, dx, dt| {
        for i in 0..len {
            res[ot + i * dt] += x[ox + i * dx];
        }
    });
    res
}

pub(crate) fn broadcast_to<S: Real>(x: &[S], xshape: &[usize], target: &[usize]) -> Vec<S> {
    if xshape == target {
        return x.to_vec();
    }
    let sx = broadcast_strides(xshape, target);
    let mut res = vec![S::zero(); numel(target)];
    for_each_row(target, &sx, &sx, |o, ox, _, len, dx, _| {
        for i in 0..len {
            res[o + i] = x[ox + i * dx];
        }
    });
    res
}

/// Checks that `target` is a valid `sum_to` destination for `shape`.
pub(crate) fn check_reducible(shape: &[usize], target: &[usize]) -> Result<()> {
    if target.is_empty() {
        return Ok(());
    }
    contract!(
        target.len() == shape.len() && target.iter().zip(shape).all(|(&t, &s)| t == s || t == 1),
        "cannot reduce shape {shape:?} to {target:?}"
    );
    Ok(())
}
