//! Mapping network: Gaussian latent `z` to a set of style tokens.
//!
//! The input is normalized onto the sphere of radius √d, passed through a
//! shared leaky-ReLU trunk, then through one linear head per style token.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::{Linear, Parameterized, LRELU_SLOPE};
use crate::tensor::Tensor;
use crate::tokens::StyleTokenSet;

/// Guard inside the latent normalization.
pub const LATENT_NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MappingConfig {
    /// Latent width and style-token width.
    pub dim: usize,
    pub depth: usize,
    pub n_styles: usize,
    /// Independent style sets emitted per image (1 = shared by all layers).
    pub sets: usize,
}

#[derive(Debug, Clone)]
pub struct MappingNetwork {
    pub config: MappingConfig,
    pub trunk: Vec<Linear>,
    pub heads: Vec<Linear>,
}

impl MappingNetwork {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, config: MappingConfig) -> Result<Self> {
        if config.dim == 0 || config.depth == 0 || config.n_styles == 0 || config.sets == 0 {
            return Err(Error::Config(format!("invalid mapping config {config:?}")));
        }
        let d = config.dim;
        let trunk = (0..config.depth).map(|_| Linear::init(rng, d, d)).collect();
        let heads = (0..config.n_styles * config.sets).map(|_| Linear::init(rng, d, d)).collect();
        Ok(MappingNetwork { config, trunk, heads })
    }

    /// Maps `[batch, d]` latents to `[batch, sets·n, d]` style tokens.
    pub fn forward(&self, z: &Tensor) -> Result<Tensor> {
        let d = self.config.dim;
        if z.rank() != 2 || z.shape()[1] != d {
            return Err(Error::dim("map_latent", format!("latent {:?}, expected [batch, {d}]", z.shape())));
        }
        let b = z.shape()[0];
        let mut h = z.pixel_norm(LATENT_NORM_EPS)?;
        for layer in &self.trunk {
            h = layer.forward(&h)?.leaky_relu(LRELU_SLOPE);
        }
        // all heads as one stacked linear map; identical to running them separately
        let ws: Vec<Tensor> = self.heads.iter().map(|l| l.weight.clone()).collect();
        let bs: Vec<Tensor> = self.heads.iter().map(|l| l.bias.clone()).collect();
        let w = Tensor::concat(&ws, 0)?;
        let bias = Tensor::concat(&bs, 0)?;
        h.linear(&w, Some(&bias))?.reshape(&[b, self.heads.len(), d])
    }

    /// Style tokens of a batch of latents.
    pub fn map(&self, z: &Tensor) -> Result<StyleTokenSet> {
        StyleTokenSet::new(self.forward(z)?)
    }

    /// Style tokens of a single `[d]` latent.
    pub fn map_latent(&self, z: &Tensor) -> Result<StyleTokenSet> {
        if z.rank() != 1 {
            return Err(Error::dim("map_latent", format!("expected [d], got {:?}", z.shape())));
        }
        self.map(&z.reshape(&[1, z.numel()])?)
    }
}

impl Parameterized for MappingNetwork {
    fn collect_params<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        for (i, l) in self.trunk.iter().enumerate() {
            l.collect(&format!("mapping.trunk.{i}"), out);
        }
        for (j, l) in self.heads.iter().enumerate() {
            l.collect(&format!("mapping.head.{j}"), out);
        }
    }

    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        for (i, l) in self.trunk.iter_mut().enumerate() {
            l.collect_mut(&format!("mapping.trunk.{i}"), out);
        }
        for (j, l) in self.heads.iter_mut().enumerate() {
            l.collect_mut(&format!("mapping.head.{j}"), out);
        }
    }
}

/// Deterministic standard-normal latent of width `d`.
pub fn sample_latent(seed: u64, d: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::from_vec(v, &[d]).expect("positive latent width")
}

/// `count` stacked latents `[count, d]` for seeds `first..first + count`.
pub fn sample_latents(first_seed: u64, count: usize, d: usize) -> Result<Tensor> {
    let rows: Vec<Tensor> = (0..count as u64)
        .map(|i| sample_latent(first_seed.wrapping_add(i), d).reshape(&[1, d]))
        .collect::<Result<_>>()?;
    Tensor::concat(&rows, 0)
}
