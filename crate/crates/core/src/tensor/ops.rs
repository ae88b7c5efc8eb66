use super::{numel_of, GradFn, Tensor};
use crate::error::{Error, Result};

// ── broadcasting helpers ─────────────────────────────────────────────

fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` viewed inside `out` (right-aligned), 0 on broadcast axes.
fn aligned_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let oi = i + rank - shape.len();
        strides[oi] = if shape[i] == 1 && out[oi] != 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

/// Calls `f(out_index, offset_a, offset_b)` for every output element in
/// row-major order, with the last axis as the tight inner loop.
fn for_each_pair(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    if out.is_empty() {
        f(0, 0, 0);
        return;
    }
    let rank = out.len();
    let inner = out[rank - 1];
    let (ia, ib) = (sa[rank - 1], sb[rank - 1]);
    let outer = numel_of(&out[..rank - 1]);
    let mut idx = vec![0usize; rank - 1];
    let (mut oa, mut ob) = (0usize, 0usize);
    let mut k = 0;
    for _ in 0..outer {
        for j in 0..inner {
            f(k, oa + j * ia, ob + j * ib);
            k += 1;
        }
        // odometer over the outer axes
        for ax in (0..rank - 1).rev() {
            idx[ax] += 1;
            oa += sa[ax];
            ob += sb[ax];
            if idx[ax] < out[ax] {
                break;
            }
            oa -= sa[ax] * out[ax];
            ob -= sb[ax] * out[ax];
            idx[ax] = 0;
        }
    }
}

fn binary_values(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<(Vec<f64>, Vec<usize>)> {
    if a.shape() == b.shape() {
        let v = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        return Ok((v, a.shape().to_vec()));
    }
    let out = broadcast_shape(a.shape(), b.shape())
        .ok_or_else(|| Error::dim(op, format!("cannot broadcast {:?} with {:?}", a.shape(), b.shape())))?;
    let (sa, sb) = (aligned_strides(a.shape(), &out), aligned_strides(b.shape(), &out));
    let mut v = vec![0.0; numel_of(&out)];
    let (da, db) = (a.data(), b.data());
    for_each_pair(&out, &sa, &sb, |k, i, j| v[k] = f(da[i], db[j]));
    Ok((v, out))
}

// ── elementwise binary ops ───────────────────────────────────────────

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

struct BinaryFn {
    kind: Binary,
    inputs: [Tensor; 2],
}

impl GradFn for BinaryFn {
    fn name(&self) -> &'static str {
        match self.kind {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
            Binary::Div => "div",
        }
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, out: &Tensor, g: &Tensor, needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        let [a, b] = &self.inputs;
        let ga = if needs[0] {
            Some(match self.kind {
                Binary::Add | Binary::Sub => g.sum_to(a.shape())?,
                Binary::Mul => g.mul(b)?.sum_to(a.shape())?,
                Binary::Div => g.div(b)?.sum_to(a.shape())?,
            })
        } else {
            None
        };
        let gb = if needs[1] {
            Some(match self.kind {
                Binary::Add => g.sum_to(b.shape())?,
                Binary::Sub => g.neg().sum_to(b.shape())?,
                Binary::Mul => g.mul(a)?.sum_to(b.shape())?,
                // d(a/b)/db = -out/b
                Binary::Div => g.mul(out)?.div(b)?.neg().sum_to(b.shape())?,
            })
        } else {
            None
        };
        Ok(vec![ga, gb])
    }
}

fn binary(kind: Binary, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (data, shape) = match kind {
        Binary::Add => binary_values("add", a, b, |x, y| x + y)?,
        Binary::Sub => binary_values("sub", a, b, |x, y| x - y)?,
        Binary::Mul => binary_values("mul", a, b, |x, y| x * y)?,
        Binary::Div => binary_values("div", a, b, |x, y| x / y)?,
    };
    Ok(Tensor::from_op(
        data,
        shape,
        BinaryFn {
            kind,
            inputs: [a.clone(), b.clone()],
        },
    ))
}

// ── elementwise unary ops ────────────────────────────────────────────

#[derive(Clone, Copy)]
enum Unary {
    AddScalar(f64),
    MulScalar(f64),
    Exp,
    Ln,
    Sqrt,
    Sigmoid,
    Softplus,
    LeakyRelu(f64),
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

struct UnaryFn {
    kind: Unary,
    inputs: [Tensor; 1],
}

impl GradFn for UnaryFn {
    fn name(&self) -> &'static str {
        match self.kind {
            Unary::AddScalar(_) => "add_scalar",
            Unary::MulScalar(_) => "mul_scalar",
            Unary::Exp => "exp",
            Unary::Ln => "ln",
            Unary::Sqrt => "sqrt",
            Unary::Sigmoid => "sigmoid",
            Unary::Softplus => "softplus",
            Unary::LeakyRelu(_) => "leaky_relu",
        }
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        let x = &self.inputs[0];
        let gx = match self.kind {
            Unary::AddScalar(_) => g.clone(),
            Unary::MulScalar(c) => g.mul_scalar(c),
            Unary::Exp => g.mul(out)?,
            Unary::Ln => g.div(x)?,
            Unary::Sqrt => g.mul_scalar(0.5).div(out)?,
            Unary::Sigmoid => g.mul(out)?.mul(&out.neg().add_scalar(1.0))?,
            Unary::Softplus => g.mul(&x.sigmoid())?,
            Unary::LeakyRelu(slope) => {
                let mask: Vec<f64> = x.data().iter().map(|&v| if v > 0.0 { 1.0 } else { slope }).collect();
                g.mul(&Tensor::from_vec(mask, x.shape())?)?
            }
        };
        Ok(vec![Some(gx)])
    }
}

fn unary(kind: Unary, x: &Tensor) -> Tensor {
    let d = x.data();
    let data: Vec<f64> = match kind {
        Unary::AddScalar(c) => d.iter().map(|v| v + c).collect(),
        Unary::MulScalar(c) => d.iter().map(|v| v * c).collect(),
        Unary::Exp => d.iter().map(|v| v.exp()).collect(),
        Unary::Ln => d.iter().map(|v| v.ln()).collect(),
        Unary::Sqrt => d.iter().map(|v| v.sqrt()).collect(),
        Unary::Sigmoid => d.iter().map(|&v| sigmoid(v)).collect(),
        Unary::Softplus => d.iter().map(|&v| softplus(v)).collect(),
        Unary::LeakyRelu(s) => d.iter().map(|&v| if v > 0.0 { v } else { s * v }).collect(),
    };
    Tensor::from_op(
        data,
        x.shape().to_vec(),
        UnaryFn {
            kind,
            inputs: [x.clone()],
        },
    )
}

// ── reductions and broadcasting ──────────────────────────────────────

struct SumToFn {
    inputs: [Tensor; 1],
}

impl GradFn for SumToFn {
    fn name(&self) -> &'static str {
        "sum_to"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, _out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.broadcast_to(self.inputs[0].shape())?)])
    }
}

struct BroadcastToFn {
    inputs: [Tensor; 1],
}

impl GradFn for BroadcastToFn {
    fn name(&self) -> &'static str {
        "broadcast_to"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, _out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.sum_to(self.inputs[0].shape())?)])
    }
}

// ── shape ops ────────────────────────────────────────────────────────

struct ReshapeFn {
    inputs: [Tensor; 1],
}

impl GradFn for ReshapeFn {
    fn name(&self) -> &'static str {
        "reshape"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, _out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(g.reshape(self.inputs[0].shape())?)])
    }
}

struct PermuteFn {
    axes: Vec<usize>,
    inputs: [Tensor; 1],
}

impl GradFn for PermuteFn {
    fn name(&self) -> &'static str {
        "permute"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, _out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        let mut inv = vec![0; self.axes.len()];
        for (i, &a) in self.axes.iter().enumerate() {
            inv[a] = i;
        }
        Ok(vec![Some(g.permute(&inv)?)])
    }
}

// ── matrix products ──────────────────────────────────────────────────

/// Whether an operand of [`Tensor::mm`] is used as stored or transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatTranspose {
    No,
    Yes,
}

impl MatTranspose {
    fn on(self) -> bool {
        self == MatTranspose::Yes
    }
}

use MatTranspose::{No, Yes};

struct MatMulFn {
    ta: MatTranspose,
    tb: MatTranspose,
    inputs: [Tensor; 2],
}

impl GradFn for MatMulFn {
    fn name(&self) -> &'static str {
        "matmul"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, _out: &Tensor, g: &Tensor, needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        let [a, b] = &self.inputs;
        let (ga, gb) = match (self.ta, self.tb) {
            (No, No) => (
                needs[0].then(|| g.mm(b, No, Yes)),
                needs[1].then(|| a.mm(g, Yes, No)),
            ),
            (No, Yes) => (
                needs[0].then(|| g.mm(b, No, No)),
                needs[1].then(|| g.mm(a, Yes, No)),
            ),
            (Yes, No) => (
                needs[0].then(|| b.mm(g, No, Yes)),
                needs[1].then(|| a.mm(g, No, No)),
            ),
            (Yes, Yes) => (
                needs[0].then(|| b.mm(g, Yes, Yes)),
                needs[1].then(|| g.mm(a, Yes, Yes)),
            ),
        };
        Ok(vec![ga.transpose()?, gb.transpose()?])
    }
}

/// `c = op(a) · op(b)` on raw row-major buffers.
#[allow(clippy::too_many_arguments)]
fn gemm(a: &[f64], b: &[f64], c: &mut [f64], r: usize, k: usize, n: usize, ta: bool, tb: bool) {
    debug_assert_eq!(a.len(), r * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), r * n);
    let (rsa, csa) = if ta { (1, r as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slice lengths match the logical dimensions checked above, and
    // every stride pair addresses elements inside its own buffer.
    unsafe {
        matrixmultiply::dgemm(
            r,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

// ── fused row-wise kernels ───────────────────────────────────────────

struct SoftmaxFn {
    inputs: [Tensor; 1],
}

impl GradFn for SoftmaxFn {
    fn name(&self) -> &'static str {
        "softmax_rows"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        let last = out.rank() - 1;
        let dot = g.mul(out)?.sum_axis(last, true)?;
        Ok(vec![Some(out.mul(&g.sub(&dot)?)?)])
    }
}

struct LayerNormFn {
    eps: f64,
    inputs: [Tensor; 1],
}

impl GradFn for LayerNormFn {
    fn name(&self) -> &'static str {
        "layer_norm"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        let x = &self.inputs[0];
        if super::is_grad_enabled() {
            // differentiable route for higher-order gradients
            let last = x.rank() - 1;
            let centered = x.sub(&x.mean_axis(last, true)?)?;
            let var = centered.mul(&centered)?.mean_axis(last, true)?;
            let rstd = Tensor::scalar(1.0).div(&var.add_scalar(self.eps).sqrt())?;
            let xhat = centered.mul(&rstd)?;
            let mg = g.mean_axis(last, true)?;
            let mgx = g.mul(&xhat)?.mean_axis(last, true)?;
            let gx = rstd.mul(&g.sub(&mg)?.sub(&xhat.mul(&mgx)?)?)?;
            return Ok(vec![Some(gx)]);
        }
        let d = *x.shape().last().unwrap_or(&1);
        let (xd, yd, gd) = (x.data(), out.data(), g.data());
        let mut gx = vec![0.0; xd.len()];
        for (row, ((xr, yr), gr)) in xd.chunks(d).zip(yd.chunks(d)).zip(gd.chunks(d)).enumerate() {
            let mean = xr.iter().sum::<f64>() / d as f64;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let rstd = 1.0 / (var + self.eps).sqrt();
            let mg = gr.iter().sum::<f64>() / d as f64;
            let mgx = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            let dst = &mut gx[row * d..(row + 1) * d];
            for i in 0..d {
                dst[i] = rstd * (gr[i] - mg - yr[i] * mgx);
            }
        }
        Ok(vec![Some(Tensor::from_vec(gx, x.shape())?)])
    }
}

impl Tensor {
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        binary(Binary::Add, self, other)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        binary(Binary::Sub, self, other)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        binary(Binary::Mul, self, other)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        binary(Binary::Div, self, other)
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        unary(Unary::AddScalar(c), self)
    }

    pub fn mul_scalar(&self, c: f64) -> Tensor {
        unary(Unary::MulScalar(c), self)
    }

    pub fn neg(&self) -> Tensor {
        self.mul_scalar(-1.0)
    }

    pub fn exp(&self) -> Tensor {
        unary(Unary::Exp, self)
    }

    pub fn ln(&self) -> Tensor {
        unary(Unary::Ln, self)
    }

    pub fn sqrt(&self) -> Tensor {
        unary(Unary::Sqrt, self)
    }

    pub fn sigmoid(&self) -> Tensor {
        unary(Unary::Sigmoid, self)
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(&self) -> Tensor {
        unary(Unary::Softplus, self)
    }

    pub fn leaky_relu(&self, slope: f64) -> Tensor {
        unary(Unary::LeakyRelu(slope), self)
    }

    pub fn square(&self) -> Result<Tensor> {
        self.mul(self)
    }

    /// Sums broadcast axes away so the result has `shape`.
    pub fn sum_to(&self, shape: &[usize]) -> Result<Tensor> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        match broadcast_shape(shape, self.shape()) {
            Some(s) if s == self.shape() => {}
            _ => {
                return Err(Error::dim(
                    "sum_to",
                    format!("{:?} does not broadcast to {:?}", shape, self.shape()),
                ))
            }
        }
        let strides = aligned_strides(shape, self.shape());
        let zeros = vec![0; self.rank()];
        let mut out = vec![0.0; numel_of(shape)];
        let src = self.data();
        for_each_pair(self.shape(), &strides, &zeros, |k, o, _| out[o] += src[k]);
        Ok(Tensor::from_op(
            out,
            shape.to_vec(),
            SumToFn {
                inputs: [self.clone()],
            },
        ))
    }

    pub fn broadcast_to(&self, shape: &[usize]) -> Result<Tensor> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        match broadcast_shape(self.shape(), shape) {
            Some(s) if s == shape => {}
            _ => {
                return Err(Error::dim(
                    "broadcast_to",
                    format!("{:?} does not broadcast to {:?}", self.shape(), shape),
                ))
            }
        }
        let strides = aligned_strides(self.shape(), shape);
        let zeros = vec![0; shape.len()];
        let mut out = vec![0.0; numel_of(shape)];
        let src = self.data();
        for_each_pair(shape, &strides, &zeros, |k, i, _| out[k] = src[i]);
        Ok(Tensor::from_op(
            out,
            shape.to_vec(),
            BroadcastToFn {
                inputs: [self.clone()],
            },
        ))
    }

    pub fn sum_all(&self) -> Tensor {
        self.reshape(&[self.numel()])
            .and_then(|t| t.sum_to(&[]))
            .expect("flattened tensor always reduces to a scalar")
    }

    pub fn mean_all(&self) -> Tensor {
        self.sum_all().mul_scalar(1.0 / self.numel() as f64)
    }

    /// Sum along `axis`, keeping it as size 1 when `keepdim`.
    pub fn sum_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        if axis >= self.rank() {
            return Err(Error::dim("sum_axis", format!("axis {axis} for shape {:?}", self.shape())));
        }
        let mut kept = self.shape().to_vec();
        kept[axis] = 1;
        let s = self.sum_to(&kept)?;
        if keepdim {
            Ok(s)
        } else {
            let mut squeezed = self.shape().to_vec();
            squeezed.remove(axis);
            s.reshape(&squeezed)
        }
    }

    pub fn mean_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        let n = *self
            .shape()
            .get(axis)
            .ok_or_else(|| Error::dim("mean_axis", format!("axis {axis} for shape {:?}", self.shape())))?;
        Ok(self.sum_axis(axis, keepdim)?.mul_scalar(1.0 / n as f64))
    }

    /// Population variance along `axis`.
    pub fn var_axis(&self, axis: usize, keepdim: bool) -> Result<Tensor> {
        let centered = self.sub(&self.mean_axis(axis, true)?)?;
        centered.square()?.mean_axis(axis, keepdim)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel_of(shape) != self.numel() || shape.contains(&0) {
            return Err(Error::dim(
                "reshape",
                format!("cannot view {:?} as {:?}", self.shape(), shape),
            ));
        }
        Ok(self.from_op_shared(
            shape.to_vec(),
            ReshapeFn {
                inputs: [self.clone()],
            },
        ))
    }

    /// Reorders axes: output axis `i` is input axis `axes[i]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Tensor> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::dim("permute", format!("axes {axes:?} for shape {:?}", self.shape())));
        }
        let in_shape = self.shape();
        let out_shape: Vec<usize> = axes.iter().map(|&a| in_shape[a]).collect();
        let mut in_strides = vec![1; rank];
        for i in (0..rank.saturating_sub(1)).rev() {
            in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
        }
        let gather: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let zeros = vec![0; rank];
        let src = self.data();
        let mut out = vec![0.0; self.numel()];
        for_each_pair(&out_shape, &gather, &zeros, |k, i, _| out[k] = src[i]);
        Ok(Tensor::from_op(
            out,
            out_shape,
            PermuteFn {
                axes: axes.to_vec(),
                inputs: [self.clone()],
            },
        ))
    }

    /// Swaps the last two axes.
    pub fn transpose(&self) -> Result<Tensor> {
        let rank = self.rank();
        if rank < 2 {
            return Err(Error::dim("transpose", format!("rank {rank} tensor")));
        }
        let mut axes: Vec<usize> = (0..rank).collect();
        axes.swap(rank - 2, rank - 1);
        self.permute(&axes)
    }

    /// Matrix product of two 2-D tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::dim(
                "matmul",
                format!("expected matrices, got {:?} and {:?}", self.shape(), other.shape()),
            ));
        }
        self.mm(other, No, No)
    }

    /// `op(self) · op(other)` for matrices, or batched over a shared
    /// leading axis when both operands have rank 3.
    pub fn mm(&self, other: &Tensor, ta: MatTranspose, tb: MatTranspose) -> Result<Tensor> {
        let (sa, sb) = (self.shape(), other.shape());
        let mismatch = || {
            Error::dim(
                "matmul",
                format!(
                    "shapes {:?}{} and {:?}{} do not chain",
                    sa,
                    if ta.on() { "ᵀ" } else { "" },
                    sb,
                    if tb.on() { "ᵀ" } else { "" }
                ),
            )
        };
        let (batch, a2, b2) = match (sa.len(), sb.len()) {
            (2, 2) => (None, [sa[0], sa[1]], [sb[0], sb[1]]),
            (3, 3) if sa[0] == sb[0] => (Some(sa[0]), [sa[1], sa[2]], [sb[1], sb[2]]),
            _ => return Err(mismatch()),
        };
        let (r, ka) = if ta.on() { (a2[1], a2[0]) } else { (a2[0], a2[1]) };
        let (kb, n) = if tb.on() { (b2[1], b2[0]) } else { (b2[0], b2[1]) };
        if ka != kb {
            return Err(mismatch());
        }
        let nb = batch.unwrap_or(1);
        let mut out = vec![0.0; nb * r * n];
        let (ad, bd) = (self.data(), other.data());
        for i in 0..nb {
            gemm(
                &ad[i * r * ka..(i + 1) * r * ka],
                &bd[i * ka * n..(i + 1) * ka * n],
                &mut out[i * r * n..(i + 1) * r * n],
                r,
                ka,
                n,
                ta.on(),
                tb.on(),
            );
        }
        let shape = match batch {
            Some(b) => vec![b, r, n],
            None => vec![r, n],
        };
        Ok(Tensor::from_op(
            out,
            shape,
            MatMulFn {
                ta,
                tb,
                inputs: [self.clone(), other.clone()],
            },
        ))
    }

    /// `x · wᵀ + bias` for `x: [rows, in]`, `w: [out, in]`, `bias: [out]`.
    pub fn linear(&self, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
        let y = self.mm(weight, No, Yes)?;
        match bias {
            Some(b) => y.add(b),
            None => Ok(y),
        }
    }

    /// Softmax over the last axis, with per-row max subtraction.
    pub fn softmax_rows(&self) -> Result<Tensor> {
        let c = match self.shape().last() {
            Some(&c) if c >= 1 => c,
            _ => return Err(Error::dim("softmax_rows", format!("shape {:?}", self.shape()))),
        };
        let mut out = self.to_vec();
        for row in out.chunks_mut(c) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            SoftmaxFn {
                inputs: [self.clone()],
            },
        ))
    }

    /// `(x − μ) / √(σ² + eps)` over the last axis, population variance.
    pub fn layer_norm(&self, eps: f64) -> Result<Tensor> {
        let d = match self.shape().last() {
            Some(&d) => d,
            None => return Err(Error::dim("layer_norm", "scalar input")),
        };
        if eps <= 0.0 {
            return Err(Error::Contract(format!("layer_norm eps must be positive, got {eps}")));
        }
        let mut out = self.to_vec();
        for row in out.chunks_mut(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let rstd = 1.0 / (var + eps).sqrt();
            row.iter_mut().for_each(|v| *v = (*v - mean) * rstd);
        }
        Ok(Tensor::from_op(
            out,
            self.shape().to_vec(),
            LayerNormFn {
                eps,
                inputs: [self.clone()],
            },
        ))
    }

    /// `x / √(mean(x²) + eps)` over the last axis, i.e. `x·√d/‖x‖`.
    pub fn pixel_norm(&self, eps: f64) -> Result<Tensor> {
        let last = self
            .rank()
            .checked_sub(1)
            .ok_or_else(|| Error::dim("pixel_norm", "scalar input"))?;
        let ms = self.square()?.mean_axis(last, true)?;
        self.div(&ms.add_scalar(eps).sqrt())
    }
}

// ── slicing along one axis ───────────────────────────────────────────

/// (outer, axis length, inner) decomposition of `shape` around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (numel_of(&shape[..axis]), shape[axis], numel_of(&shape[axis + 1..]))
}

struct NarrowFn {
    axis: usize,
    start: usize,
    inputs: [Tensor; 1],
}

impl GradFn for NarrowFn {
    fn name(&self) -> &'static str {
        "narrow"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, _out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        let full = self.inputs[0].shape()[self.axis];
        Ok(vec![Some(g.pad_axis(self.axis, self.start, full)?)])
    }
}

struct PadAxisFn {
    axis: usize,
    start: usize,
    inputs: [Tensor; 1],
}

impl GradFn for PadAxisFn {
    fn name(&self) -> &'static str {
        "pad_axis"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, _out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        let len = self.inputs[0].shape()[self.axis];
        Ok(vec![Some(g.narrow(self.axis, self.start, len)?)])
    }
}

struct ConcatFn {
    axis: usize,
    inputs: Vec<Tensor>,
}

impl GradFn for ConcatFn {
    fn name(&self) -> &'static str {
        "concat"
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, _out: &Tensor, g: &Tensor, needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        let mut start = 0;
        let mut parts = Vec::with_capacity(self.inputs.len());
        for (inp, &need) in self.inputs.iter().zip(needs) {
            let len = inp.shape()[self.axis];
            parts.push(if need { Some(g.narrow(self.axis, start, len)?) } else { None });
            start += len;
        }
        Ok(parts)
    }
}

impl Tensor {
    /// Entries `start..start + len` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        if axis >= self.rank() || len == 0 || start + len > self.shape()[axis] {
            return Err(Error::dim(
                "narrow",
                format!("{start}..{} on axis {axis} of {:?}", start + len, self.shape()),
            ));
        }
        let (outer, full, inner) = split_axis(self.shape(), axis);
        let src = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            out.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        Ok(Tensor::from_op(
            out,
            shape,
            NarrowFn {
                axis,
                start,
                inputs: [self.clone()],
            },
        ))
    }

    /// Places this tensor at `start` along `axis` inside zeros of length `full`.
    pub fn pad_axis(&self, axis: usize, start: usize, full: usize) -> Result<Tensor> {
        if axis >= self.rank() || start + self.shape()[axis] > full {
            return Err(Error::dim(
                "pad_axis",
                format!("offset {start} into length {full} on axis {axis} of {:?}", self.shape()),
            ));
        }
        let (outer, len, inner) = split_axis(self.shape(), axis);
        let src = self.data();
        let mut out = vec![0.0; outer * full * inner];
        for o in 0..outer {
            let dst = (o * full + start) * inner;
            out[dst..dst + len * inner].copy_from_slice(&src[o * len * inner..(o + 1) * len * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = full;
        Ok(Tensor::from_op(
            out,
            shape,
            PadAxisFn {
                axis,
                start,
                inputs: [self.clone()],
            },
        ))
    }

    /// Joins tensors along `axis`; all other axes must agree.
    pub fn concat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| Error::dim("concat", "no inputs"))?;
        if axis >= first.rank() {
            return Err(Error::dim("concat", format!("axis {axis} for shape {:?}", first.shape())));
        }
        for p in parts {
            let ok = p.rank() == first.rank()
                && p.shape().iter().zip(first.shape()).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(Error::dim(
                    "concat",
                    format!("{:?} does not stack with {:?} on axis {axis}", p.shape(), first.shape()),
                ));
            }
        }
        let (outer, _, inner) = split_axis(first.shape(), axis);
        let total: usize = parts.iter().map(|p| p.shape()[axis]).sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for p in parts {
                let chunk = p.shape()[axis] * inner;
                out.extend_from_slice(&p.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        Ok(Tensor::from_op(
            out,
            shape,
            ConcatFn {
                axis,
                inputs: parts.to_vec(),
            },
        ))
    }
}
