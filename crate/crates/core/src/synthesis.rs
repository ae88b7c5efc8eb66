//! Skip-architecture synthesis network built from style blocks.
//!
//! A learned constant token grid is refined by style blocks at each
//! resolution. Every resolution emits an RGB image through a per-token
//! linear map; images are accumulated by upsampling the running sum and
//! adding the new one. Between resolutions the token grid is upsampled.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::style_block::{NormKind, StyleBlock};
use crate::tensor::Tensor;
use crate::tokens::{tokens_to_image, AttentionMap, ContentTokenGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenUpsample {
    #[default]
    Bilinear,
    Nearest,
}

impl TokenUpsample {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenUpsample::Bilinear => "bilinear",
            TokenUpsample::Nearest => "nearest",
        }
    }
}

impl std::str::FromStr for TokenUpsample {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilinear" => Ok(TokenUpsample::Bilinear),
            "nearest" => Ok(TokenUpsample::Nearest),
            _ => Err(Error::Config(format!("unknown token upsample {s:?} (bilinear, nearest)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    /// Ascending, each twice the previous.
    pub resolutions: Vec<usize>,
    pub blocks_per_resolution: usize,
    /// Token width per resolution.
    pub widths: Vec<usize>,
    /// Patch edge per resolution; the token grid side is `resolution / patch`.
    pub patch_sizes: Vec<usize>,
    pub n_style_tokens: usize,
    /// Width of incoming style tokens.
    pub style_dim: usize,
    pub image_channels: usize,
    pub norm: NormKind,
    pub heads: usize,
    pub token_upsample: TokenUpsample,
    /// Each block reads its own style set instead of one shared set.
    pub per_layer_styles: bool,
}

impl SynthesisConfig {
    /// Constant width and patch size at every resolution.
    pub fn uniform(resolutions: Vec<usize>, width: usize, patch: usize, n_style_tokens: usize) -> Self {
        let k = resolutions.len();
        SynthesisConfig {
            resolutions,
            blocks_per_resolution: 2,
            widths: vec![width; k],
            patch_sizes: vec![patch; k],
            n_style_tokens,
            style_dim: width,
            image_channels: 3,
            norm: NormKind::LayerNorm,
            heads: 1,
            token_upsample: TokenUpsample::Bilinear,
            per_layer_styles: false,
        }
    }

    pub fn output_resolution(&self) -> usize {
        *self.resolutions.last().expect("validated config has resolutions")
    }

    pub fn num_layers(&self) -> usize {
        self.resolutions.len() * self.blocks_per_resolution
    }

    /// Token grid side per resolution.
    pub fn grid_sides(&self) -> Vec<usize> {
        self.resolutions.iter().zip(&self.patch_sizes).map(|(r, p)| r / p).collect()
    }

    /// Content-token count per resolution.
    pub fn m_per_resolution(&self) -> Vec<usize> {
        self.grid_sides().iter().map(|g| g * g).collect()
    }

    /// Style sets the mapping network must emit.
    pub fn style_sets(&self) -> usize {
        if self.per_layer_styles {
            self.num_layers()
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.resolutions.len();
        let bad = |msg: String| Err(Error::Config(msg));
        if k == 0 {
            return bad("no resolutions".into());
        }
        if self.widths.len() != k || self.patch_sizes.len() != k {
            return bad(format!(
                "{k} resolutions but {} widths and {} patch sizes",
                self.widths.len(),
                self.patch_sizes.len()
            ));
        }
        if self.blocks_per_resolution == 0 || self.n_style_tokens == 0 || self.image_channels == 0 {
            return bad("blocks per resolution, style tokens and channels must be positive".into());
        }
        if self.style_dim == 0 || self.widths.contains(&0) {
            return bad("widths must be positive".into());
        }
        if self.heads == 0 || self.widths.iter().any(|w| w % self.heads != 0) {
            return bad(format!("widths {:?} do not split into {} heads", self.widths, self.heads));
        }
        for (i, (&r, &p)) in self.resolutions.iter().zip(&self.patch_sizes).enumerate() {
            if p == 0 || r % p != 0 {
                return bad(format!("patch {p} does not tile resolution {r}"));
            }
            if i > 0 {
                if r != 2 * self.resolutions[i - 1] {
                    return bad(format!("resolution {r} is not twice {}", self.resolutions[i - 1]));
                }
                let (g0, g1) = (self.resolutions[i - 1] / self.patch_sizes[i - 1], r / p);
                if g1 != g0 && g1 != 2 * g0 {
                    return bad(format!("token grid cannot go from {g0}² to {g1}²"));
                }
            }
        }
        Ok(())
    }
}

/// Per-resolution parameters.
#[derive(Debug, Clone)]
pub struct ResolutionStage {
    pub resolution: usize,
    pub grid: usize,
    pub patch: usize,
    /// Width change from the previous stage, if any.
    pub proj: Option<Linear>,
    pub blocks: Vec<StyleBlock>,
    pub to_rgb: Linear,
}

#[derive(Debug, Clone)]
pub struct SynthesisNetwork {
    pub config: SynthesisConfig,
    pub base: ContentTokenGrid,
    pub stages: Vec<ResolutionStage>,
}

/// Output of one synthesis pass.
#[derive(Debug, Clone)]
pub struct Synthesized {
    /// `[batch, c, R, R]`.
    pub image: Tensor,
    /// One per style block, in forward order.
    pub attention: Vec<AttentionMap>,
}

/// Bilinear or nearest 2× growth of `[b, g·g, d]` tokens on a `g × g` grid.
pub fn upsample_token_grid(tokens: &Tensor, grid_h: usize, grid_w: usize, mode: TokenUpsample) -> Result<Tensor> {
    let (b, m, d) = match *tokens.shape() {
        [m, d] => (1, m, d),
        [b, m, d] => (b, m, d),
        _ => return Err(Error::dim("upsample_token_grid", format!("shape {:?}", tokens.shape()))),
    };
    if m != grid_h * grid_w {
        return Err(Error::dim(
            "upsample_token_grid",
            format!("{m} tokens on a {grid_h}×{grid_w} grid"),
        ));
    }
    let g = tokens.reshape(&[b, grid_h, grid_w, d])?;
    let up = match mode {
        TokenUpsample::Bilinear => g.upsample_bilinear2x()?,
        TokenUpsample::Nearest => g.upsample_nearest2x()?,
    };
    if tokens.rank() == 2 {
        up.reshape(&[4 * m, d])
    } else {
        up.reshape(&[b, 4 * m, d])
    }
}

/// Bilinear 2× upsample of `[b, c, H, W]` images.
pub fn upsample_image(image: &Tensor) -> Result<Tensor> {
    let [b, c, h, w] = match *image.shape() {
        [b, c, h, w] => [b, c, h, w],
        _ => return Err(Error::dim("upsample_image", format!("shape {:?}", image.shape()))),
    };
    image
        .reshape(&[b * c, h, w, 1])?
        .upsample_bilinear2x()?
        .reshape(&[b, c, 2 * h, 2 * w])
}

impl SynthesisNetwork {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, config: SynthesisConfig) -> Result<Self> {
        config.validate()?;
        let sides = config.grid_sides();
        let base = ContentTokenGrid::init(rng, sides[0], sides[0], config.patch_sizes[0], config.widths[0])?;
        let mut stages = Vec::with_capacity(config.resolutions.len());
        for (i, &res) in config.resolutions.iter().enumerate() {
            let width = config.widths[i];
            let patch = config.patch_sizes[i];
            let proj = (i > 0 && config.widths[i - 1] != width).then(|| Linear::init(rng, config.widths[i - 1], width));
            let blocks = (0..config.blocks_per_resolution)
                .map(|_| StyleBlock::init(rng, width, config.n_style_tokens, config.style_dim, config.norm, config.heads))
                .collect::<Result<_>>()?;
            let to_rgb = Linear::init(rng, width, patch * patch * config.image_channels);
            stages.push(ResolutionStage {
                resolution: res,
                grid: sides[i],
                patch,
                proj,
                blocks,
                to_rgb,
            });
        }
        Ok(SynthesisNetwork { config, base, stages })
    }

    pub fn num_layers(&self) -> usize {
        self.config.num_layers()
    }

    /// Renders `[b, L·n, d]` (per-layer) or `[b, n, d]` (shared) style tokens.
    pub fn forward(&self, styles: &Tensor) -> Result<Synthesized> {
        let n = self.config.n_style_tokens;
        let sets = self.config.style_sets();
        if styles.rank() != 3 || styles.shape()[1] != n * sets || styles.shape()[2] != self.config.style_dim {
            return Err(Error::dim(
                "synthesize",
                format!(
                    "styles {:?}, expected [batch, {}, {}]",
                    styles.shape(),
                    n * sets,
                    self.config.style_dim
                ),
            ));
        }
        let per_layer: Vec<Tensor> = if sets == 1 {
            vec![styles.clone(); self.num_layers()]
        } else {
            (0..sets).map(|l| styles.narrow(1, l * n, n)).collect::<Result<_>>()?
        };
        self.forward_layers(&per_layer)
    }

    /// Renders with an explicit `[b, n, d]` style tensor for every block.
    pub fn forward_layers(&self, layer_styles: &[Tensor]) -> Result<Synthesized> {
        if layer_styles.len() != self.num_layers() {
            return Err(Error::Contract(format!(
                "{} style sets for {} layers",
                layer_styles.len(),
                self.num_layers()
            )));
        }
        let b = layer_styles[0].shape()[0];
        let base = self.base.with_positions()?;
        let (m0, d0) = (base.shape()[0], base.shape()[1]);
        let mut tokens = base.reshape(&[1, m0, d0])?.broadcast_to(&[b, m0, d0])?;
        let mut image: Option<Tensor> = None;
        let mut attention = Vec::with_capacity(self.num_layers());
        let mut layer = 0;
        let c = self.config.image_channels;
        for (i, stage) in self.stages.iter().enumerate() {
            if i > 0 {
                let prev = self.stages[i - 1].grid;
                if stage.grid == 2 * prev {
                    tokens = upsample_token_grid(&tokens, prev, prev, self.config.token_upsample)?;
                }
                if let Some(p) = &stage.proj {
                    tokens = p.forward(&tokens)?;
                }
            }
            for block in &stage.blocks {
                let (out, attn) = block.forward(&tokens, &layer_styles[layer])?;
                attention.push(StyleBlock::attention_map(attn, layer, stage.grid, stage.grid));
                tokens = out;
                layer += 1;
            }
            let rgb = tokens_to_image(&stage.to_rgb.forward(&tokens)?, stage.grid, stage.grid, stage.patch, c)?;
            image = Some(match image {
                None => rgb,
                Some(acc) => upsample_image(&acc)?.add(&rgb)?,
            });
        }
        Ok(Synthesized {
            image: image.expect("at least one resolution"),
            attention,
        })
    }

    pub fn collect<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        out.push(("synthesis.base.tokens".into(), &self.base.tokens));
        out.push(("synthesis.base.pos".into(), &self.base.pos_encodings));
        for stage in &self.stages {
            let r = stage.resolution;
            if let Some(p) = &stage.proj {
                p.collect(&format!("synthesis.{r}.proj"), out);
            }
            for (j, block) in stage.blocks.iter().enumerate() {
                block.collect(&format!("synthesis.{r}.{j}"), out);
            }
            stage.to_rgb.collect(&format!("synthesis.{r}.torgb"), out);
        }
    }

    pub fn collect_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push(("synthesis.base.tokens".into(), &mut self.base.tokens));
        out.push(("synthesis.base.pos".into(), &mut self.base.pos_encodings));
        for stage in &mut self.stages {
            let r = stage.resolution;
            if let Some(p) = &mut stage.proj {
                p.collect_mut(&format!("synthesis.{r}.proj"), out);
            }
            for (j, block) in stage.blocks.iter_mut().enumerate() {
                block.collect_mut(&format!("synthesis.{r}.{j}"), out);
            }
            stage.to_rgb.collect_mut(&format!("synthesis.{r}.torgb"), out);
        }
    }
}
