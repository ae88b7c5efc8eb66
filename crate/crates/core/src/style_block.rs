//! One generator layer: style normalization, content-aware style lookup by
//! cross-attention, channel-wise modulation and a per-token embedding.
//!
//! Content tokens only attend to style tokens, never to each other, so the
//! block treats every content token independently.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Linear, LRELU_SLOPE};
use crate::tensor::{MatTranspose, Tensor};
use crate::tokens::{AttentionMap, SemanticKeySet};

/// Guard inside every normalization.
pub const NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormKind {
    /// Per-token mean/std over channels.
    #[default]
    LayerNorm,
    /// Per-channel mean/std over the tokens of one image.
    InstanceNorm,
    /// Per-token scaling to norm √d.
    PixelNorm,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::LayerNorm => "layer",
            NormKind::InstanceNorm => "instance",
            NormKind::PixelNorm => "pixel",
        }
    }

    pub const ALL: [NormKind; 3] = [NormKind::LayerNorm, NormKind::InstanceNorm, NormKind::PixelNorm];
}

impl std::str::FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layer" => Ok(NormKind::LayerNorm),
            "instance" => Ok(NormKind::InstanceNorm),
            "pixel" => Ok(NormKind::PixelNorm),
            _ => Err(Error::Config(format!("unknown norm kind {s:?} (layer, instance, pixel)"))),
        }
    }
}

/// Normalizes `[batch, m, d]` (or `[m, d]`) content tokens.
pub fn normalize(c: &Tensor, kind: NormKind) -> Result<Tensor> {
    match kind {
        NormKind::LayerNorm => c.layer_norm(NORM_EPS),
        NormKind::PixelNorm => c.pixel_norm(NORM_EPS),
        NormKind::InstanceNorm => {
            let axis = c.rank().checked_sub(2).ok_or_else(|| Error::dim("instance_norm", "rank < 2".to_string()))?;
            let mu = c.mean_axis(axis, true)?;
            let centred = c.sub(&mu)?;
            let var = centred.square()?.mean_axis(axis, true)?;
            centred.div(&var.add_scalar(NORM_EPS).sqrt())
        }
    }
}

/// Elementwise `c ⊙ s′`; shapes must match exactly.
pub fn modulate(c: &Tensor, s_prime: &Tensor) -> Result<Tensor> {
    if c.shape() != s_prime.shape() {
        return Err(Error::dim(
            "modulate",
            format!("content {:?} vs styles {:?}", c.shape(), s_prime.shape()),
        ));
    }
    c.mul(s_prime)
}

/// Cross-attention of queries on keys, returning `(S′, weights)`.
///
/// `queries: [b, m, d]`, `keys: [n, d]`, `styles: [b, n, d]`. With several
/// heads the width is split evenly and the returned weights are the head
/// average.
pub fn attend(queries: &Tensor, keys: &Tensor, styles: &Tensor, heads: usize) -> Result<(Tensor, Tensor)> {
    let (b, m, d) = match *queries.shape() {
        [b, m, d] => (b, m, d),
        _ => return Err(Error::dim("compute_styles", format!("queries {:?}", queries.shape()))),
    };
    let n = keys.shape()[0];
    if keys.shape() != [n, d] || styles.shape() != [b, n, d] {
        return Err(Error::dim(
            "compute_styles",
            format!(
                "queries {:?}, keys {:?}, styles {:?}",
                queries.shape(),
                keys.shape(),
                styles.shape()
            ),
        ));
    }
    if heads == 0 || d % heads != 0 {
        return Err(Error::Config(format!("width {d} does not split into {heads} heads")));
    }
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    if heads == 1 {
        let logits = queries
            .reshape(&[b * m, d])?
            .mm(keys, MatTranspose::No, MatTranspose::Yes)?
            .mul_scalar(scale)
            .reshape(&[b, m, n])?;
        let attn = logits.softmax_rows()?;
        let s_prime = attn.mm(styles, MatTranspose::No, MatTranspose::No)?;
        return Ok((s_prime, attn));
    }
    let q = queries.reshape(&[b, m, heads, dh])?.permute(&[0, 2, 1, 3])?.reshape(&[b * heads, m, dh])?;
    let k = keys
        .reshape(&[1, n, heads, dh])?
        .permute(&[0, 2, 1, 3])?
        .broadcast_to(&[b, heads, n, dh])?
        .reshape(&[b * heads, n, dh])?;
    let v = styles.reshape(&[b, n, heads, dh])?.permute(&[0, 2, 1, 3])?.reshape(&[b * heads, n, dh])?;
    let attn = q.mm(&k, MatTranspose::No, MatTranspose::Yes)?.mul_scalar(scale).softmax_rows()?;
    let out = attn
        .mm(&v, MatTranspose::No, MatTranspose::No)?
        .reshape(&[b, heads, m, dh])?
        .permute(&[0, 2, 1, 3])?
        .reshape(&[b, m, d])?;
    let mean_attn = attn.reshape(&[b, heads, m, n])?.mean_axis(1, false)?;
    Ok((out, mean_attn))
}

#[derive(Debug, Clone)]
pub struct StyleBlock {
    pub keys: SemanticKeySet,
    pub query: Linear,
    pub embed: Linear,
    /// Maps incoming style tokens to this block's width when they differ.
    pub style_adapter: Option<Linear>,
    pub norm: NormKind,
    pub heads: usize,
}

impl StyleBlock {
    /// Keys from N(0, 1); linear layers as in [`Linear::init`].
    pub fn init<R: Rng + ?Sized>(
        rng: &mut R,
        width: usize,
        n_styles: usize,
        style_dim: usize,
        norm: NormKind,
        heads: usize,
    ) -> Result<Self> {
        if heads == 0 || !width.is_multiple_of(heads) {
            return Err(Error::Config(format!("width {width} does not split into {heads} heads")));
        }
        let keys = SemanticKeySet::new(Tensor::randn(rng, &[n_styles, width], 1.0).requires_grad_(true))?;
        let query = Linear::init(rng, width, width);
        let embed = Linear::init(rng, width, width);
        let style_adapter = (style_dim != width).then(|| Linear::init(rng, style_dim, width));
        Ok(StyleBlock {
            keys,
            query,
            embed,
            style_adapter,
            norm,
            heads,
        })
    }

    pub fn width(&self) -> usize {
        self.embed.out_features()
    }

    pub fn n_styles(&self) -> usize {
        self.keys.n()
    }

    /// `S′` and attention for already-normalized content `[b, m, d]`.
    pub fn compute_styles(&self, c_norm: &Tensor, styles: &Tensor) -> Result<(Tensor, Tensor)> {
        let styles = match &self.style_adapter {
            Some(a) => a.forward(styles)?,
            None => styles.clone(),
        };
        let q = self.query.forward(c_norm)?;
        attend(&q, &self.keys.keys, &styles, self.heads)
    }

    /// `lrelu(embed(norm(c) ⊙ S′))` for content `[b, m, d]` and styles
    /// `[b, n, d_style]`. The attention result replaces the content scale;
    /// nothing is added back.
    pub fn forward(&self, c_in: &Tensor, styles: &Tensor) -> Result<(Tensor, Tensor)> {
        if c_in.rank() != 3 || c_in.shape()[2] != self.width() {
            return Err(Error::dim(
                "style_block",
                format!("content {:?} for width {}", c_in.shape(), self.width()),
            ));
        }
        if styles.rank() != 3 || styles.shape()[0] != c_in.shape()[0] || styles.shape()[1] != self.n_styles() {
            return Err(Error::dim(
                "style_block",
                format!("styles {:?} for content {:?} and {} keys", styles.shape(), c_in.shape(), self.n_styles()),
            ));
        }
        let c_norm = normalize(c_in, self.norm)?;
        let (s_prime, attn) = self.compute_styles(&c_norm, styles)?;
        let out = self.embed.forward(&modulate(&c_norm, &s_prime)?)?.leaky_relu(LRELU_SLOPE);
        Ok((out, attn))
    }

    pub fn attention_map(attn: Tensor, layer_index: usize, grid_h: usize, grid_w: usize) -> AttentionMap {
        AttentionMap {
            weights: attn,
            layer_index,
            grid_h,
            grid_w,
        }
    }

    pub fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.keys"), &self.keys.keys));
        out.push((format!("{prefix}.qw"), &self.query.weight));
        out.push((format!("{prefix}.qb"), &self.query.bias));
        out.push((format!("{prefix}.ew"), &self.embed.weight));
        out.push((format!("{prefix}.eb"), &self.embed.bias));
        if let Some(a) = &self.style_adapter {
            a.collect(&format!("{prefix}.adapt"), out);
        }
    }

    pub fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.keys"), &mut self.keys.keys));
        out.push((format!("{prefix}.qw"), &mut self.query.weight));
        out.push((format!("{prefix}.qb"), &mut self.query.bias));
        out.push((format!("{prefix}.ew"), &mut self.embed.weight));
        out.push((format!("{prefix}.eb"), &mut self.embed.bias));
        if let Some(a) = &mut self.style_adapter {
            a.collect_mut(&format!("{prefix}.adapt"), out);
        }
    }
}
