//! Resampling and patch extraction on channels-last grids `[N, H, W, C]`.
//!
//! Each operation is linear; its backward rule is the adjoint operation,
//! which is itself recorded, so these compose to any derivative order.

use super::{GradFn, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    UpNearest,
    SumPool,
    UpBilinear,
    UpBilinearT,
    Im2Col,
    Col2Im,
}

impl Kind {
    fn adjoint(self) -> Kind {
        match self {
            Kind::UpNearest => Kind::SumPool,
            Kind::SumPool => Kind::UpNearest,
            Kind::UpBilinear => Kind::UpBilinearT,
            Kind::UpBilinearT => Kind::UpBilinear,
            Kind::Im2Col => Kind::Col2Im,
            Kind::Col2Im => Kind::Im2Col,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::UpNearest => "upsample_nearest2x",
            Kind::SumPool => "sum_pool2x",
            Kind::UpBilinear => "upsample_bilinear2x",
            Kind::UpBilinearT => "bilinear2x_adjoint",
            Kind::Im2Col => "im2col3x3",
            Kind::Col2Im => "col2im3x3",
        }
    }
}

/// `[n, h, w, c]` of the low-resolution (or un-patched) side of the map.
type Geom = [usize; 4];

struct SpatialFn {
    kind: Kind,
    geom: Geom,
    inputs: [Tensor; 1],
}

impl GradFn for SpatialFn {
    fn name(&self) -> &'static str {
        self.kind.name()
    }
    fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }
    fn backward(&self, _out: &Tensor, g: &Tensor, _needs: &[bool]) -> Result<Vec<Option<Tensor>>> {
        Ok(vec![Some(apply(self.kind.adjoint(), self.geom, g))])
    }
}

fn apply(kind: Kind, geom: Geom, x: &Tensor) -> Tensor {
    let [n, h, w, c] = geom;
    let (data, shape) = match kind {
        Kind::UpNearest => (up_nearest(x.data(), geom), vec![n, 2 * h, 2 * w, c]),
        Kind::SumPool => (sum_pool(x.data(), geom), vec![n, h, w, c]),
        Kind::UpBilinear => (up_bilinear(x.data(), geom), vec![n, 2 * h, 2 * w, c]),
        Kind::UpBilinearT => (up_bilinear_t(x.data(), geom), vec![n, h, w, c]),
        Kind::Im2Col => (im2col(x.data(), geom), vec![n * h * w, 9 * c]),
        Kind::Col2Im => (col2im(x.data(), geom), vec![n, h, w, c]),
    };
    Tensor::from_op(
        data,
        shape,
        SpatialFn {
            kind,
            geom,
            inputs: [x.clone()],
        },
    )
}

fn up_nearest(src: &[f64], [n, h, w, c]: Geom) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; n * oh * ow * c];
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let s = ((b * h + oy / 2) * w + ox / 2) * c;
                let d = ((b * oh + oy) * ow + ox) * c;
                out[d..d + c].copy_from_slice(&src[s..s + c]);
            }
        }
    }
    out
}

fn sum_pool(src: &[f64], [n, h, w, c]: Geom) -> Vec<f64> {
    let (ih, iw) = (2 * h, 2 * w);
    let mut out = vec![0.0; n * h * w * c];
    for b in 0..n {
        for iy in 0..ih {
            for ix in 0..iw {
                let s = ((b * ih + iy) * iw + ix) * c;
                let d = ((b * h + iy / 2) * w + ix / 2) * c;
                for k in 0..c {
                    out[d + k] += src[s + k];
                }
            }
        }
    }
    out
}

/// Two (index, weight) taps per output position of a half-pixel-centred
/// 2× linear upsample of an axis of length `len`, clamped at the edges.
fn taps(len: usize) -> Vec<[(usize, f64); 2]> {
    let last = len as isize - 1;
    let clamp = |i: isize| i.clamp(0, last) as usize;
    (0..2 * len as isize)
        .map(|o| {
            let i = o / 2;
            if o % 2 == 0 {
                [(clamp(i - 1), 0.25), (clamp(i), 0.75)]
            } else {
                [(clamp(i), 0.75), (clamp(i + 1), 0.25)]
            }
        })
        .collect()
}

fn up_bilinear(src: &[f64], [n, h, w, c]: Geom) -> Vec<f64> {
    let (ty, tx) = (taps(h), taps(w));
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; n * oh * ow * c];
    for b in 0..n {
        for (oy, ry) in ty.iter().enumerate() {
            for (ox, rx) in tx.iter().enumerate() {
                let d = ((b * oh + oy) * ow + ox) * c;
                for &(iy, wy) in ry {
                    for &(ix, wx) in rx {
                        let s = ((b * h + iy) * w + ix) * c;
                        let wt = wy * wx;
                        for k in 0..c {
                            out[d + k] += wt * src[s + k];
                        }
                    }
                }
            }
        }
    }
    out
}

fn up_bilinear_t(src: &[f64], [n, h, w, c]: Geom) -> Vec<f64> {
    let (ty, tx) = (taps(h), taps(w));
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; n * h * w * c];
    for b in 0..n {
        for (oy, ry) in ty.iter().enumerate() {
            for (ox, rx) in tx.iter().enumerate() {
                let s = ((b * oh + oy) * ow + ox) * c;
                for &(iy, wy) in ry {
                    for &(ix, wx) in rx {
                        let d = ((b * h + iy) * w + ix) * c;
                        let wt = wy * wx;
                        for k in 0..c {
                            out[d + k] += wt * src[s + k];
                        }
                    }
                }
            }
        }
    }
    out
}

fn im2col(src: &[f64], [n, h, w, c]: Geom) -> Vec<f64> {
    let row = 9 * c;
    let mut out = vec![0.0; n * h * w * row];
    for b in 0..n {
        for y in 0..h {
            for x in 0..w {
                let d0 = ((b * h + y) * w + x) * row;
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = x as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let s = ((b * h + sy as usize) * w + sx as usize) * c;
                        let d = d0 + (ky * 3 + kx) * c;
                        out[d..d + c].copy_from_slice(&src[s..s + c]);
                    }
                }
            }
        }
    }
    out
}

fn col2im(src: &[f64], [n, h, w, c]: Geom) -> Vec<f64> {
    let row = 9 * c;
    let mut out = vec![0.0; n * h * w * c];
    for b in 0..n {
        for y in 0..h {
            for x in 0..w {
                let s0 = ((b * h + y) * w + x) * row;
                for ky in 0..3 {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for kx in 0..3 {
                        let sx = x as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        let d = ((b * h + sy as usize) * w + sx as usize) * c;
                        let s = s0 + (ky * 3 + kx) * c;
                        for k in 0..c {
                            out[d + k] += src[s + k];
                        }
                    }
                }
            }
        }
    }
    out
}

fn nhwc(op: &'static str, x: &Tensor) -> Result<Geom> {
    match *x.shape() {
        [n, h, w, c] => Ok([n, h, w, c]),
        _ => Err(Error::dim(op, format!("expected [N, H, W, C], got {:?}", x.shape()))),
    }
}

fn halved(op: &'static str, x: &Tensor) -> Result<Geom> {
    let [n, h, w, c] = nhwc(op, x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::dim(op, format!("odd spatial size {h}×{w}")));
    }
    Ok([n, h / 2, w / 2, c])
}

impl Tensor {
    /// Repeats every cell of a `[N, H, W, C]` grid into a 2×2 block.
    pub fn upsample_nearest2x(&self) -> Result<Tensor> {
        Ok(apply(Kind::UpNearest, nhwc("upsample_nearest2x", self)?, self))
    }

    /// Sum over non-overlapping 2×2 blocks; adjoint of nearest upsampling.
    pub fn sum_pool2x(&self) -> Result<Tensor> {
        Ok(apply(Kind::SumPool, halved("sum_pool2x", self)?, self))
    }

    /// Mean over non-overlapping 2×2 blocks.
    pub fn avg_pool2x(&self) -> Result<Tensor> {
        Ok(self.sum_pool2x()?.mul_scalar(0.25))
    }

    /// Bilinear 2× upsample with half-pixel centres and clamped edges.
    pub fn upsample_bilinear2x(&self) -> Result<Tensor> {
        Ok(apply(Kind::UpBilinear, nhwc("upsample_bilinear2x", self)?, self))
    }

    /// Adjoint (transpose) of [`Tensor::upsample_bilinear2x`].
    pub fn bilinear2x_adjoint(&self) -> Result<Tensor> {
        Ok(apply(Kind::UpBilinearT, halved("bilinear2x_adjoint", self)?, self))
    }

    /// 3×3 patches with zero padding: `[N, H, W, C]` → `[N·H·W, 9·C]`,
    /// patch entries ordered (ky, kx, c).
    pub fn im2col3x3(&self) -> Result<Tensor> {
        Ok(apply(Kind::Im2Col, nhwc("im2col3x3", self)?, self))
    }

    /// Scatter-add adjoint of [`Tensor::im2col3x3`] back onto `[n, h, w, c]`.
    pub fn col2im3x3(&self, n: usize, h: usize, w: usize, c: usize) -> Result<Tensor> {
        if self.shape() != [n * h * w, 9 * c] {
            return Err(Error::dim(
                "col2im3x3",
                format!("{:?} is not the patch matrix of [{n}, {h}, {w}, {c}]", self.shape()),
            ));
        }
        Ok(apply(Kind::Col2Im, [n, h, w, c], self))
    }
}
