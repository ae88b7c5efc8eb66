//! Content tokens, style tokens, semantic keys and attention maps.
//!
//! Token grids are flattened row-major over the grid. Inside a token of
//! width `p²·c`, entries are ordered (patch row, patch column, channel).

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Std of the initial position encodings.
pub const POSITION_INIT_STD: f64 = 0.02;

/// Learned constant content tokens plus learned position encodings.
#[derive(Debug, Clone)]
pub struct ContentTokenGrid {
    pub tokens: Tensor,
    pub pos_encodings: Tensor,
    pub grid_h: usize,
    pub grid_w: usize,
    pub patch: usize,
}

impl ContentTokenGrid {
    pub fn new(tokens: Tensor, pos_encodings: Tensor, grid_h: usize, grid_w: usize, patch: usize) -> Result<Self> {
        if tokens.rank() != 2 || tokens.shape()[0] != grid_h * grid_w {
            return Err(Error::dim(
                "content_tokens",
                format!("tokens {:?} for a {grid_h}×{grid_w} grid", tokens.shape()),
            ));
        }
        if tokens.shape() != pos_encodings.shape() {
            return Err(Error::dim(
                "content_tokens",
                format!("tokens {:?} vs positions {:?}", tokens.shape(), pos_encodings.shape()),
            ));
        }
        if patch == 0 {
            return Err(Error::Config("patch size must be positive".into()));
        }
        Ok(ContentTokenGrid {
            tokens,
            pos_encodings,
            grid_h,
            grid_w,
            patch,
        })
    }

    /// Tokens from N(0, 1), positions from N(0, 0.02²); both trainable.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, grid_h: usize, grid_w: usize, patch: usize, width: usize) -> Result<Self> {
        let m = grid_h * grid_w;
        let tokens = Tensor::randn(rng, &[m, width], 1.0).requires_grad_(true);
        let pos = Tensor::randn(rng, &[m, width], POSITION_INIT_STD).requires_grad_(true);
        Self::new(tokens, pos, grid_h, grid_w, patch)
    }

    pub fn len(&self) -> usize {
        self.grid_h * self.grid_w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.tokens.shape()[1]
    }

    /// Content tokens with their position encodings added.
    pub fn with_positions(&self) -> Result<Tensor> {
        self.tokens.add(&self.pos_encodings)
    }
}

/// A batch of style-token sets, stored as `[batch, n, d]`.
#[derive(Debug, Clone)]
pub struct StyleTokenSet {
    pub styles: Tensor,
}

impl StyleTokenSet {
    pub fn new(styles: Tensor) -> Result<Self> {
        if styles.rank() != 3 {
            return Err(Error::dim(
                "style_tokens",
                format!("expected [batch, n, d], got {:?}", styles.shape()),
            ));
        }
        Ok(StyleTokenSet { styles })
    }

    /// A single set from an `[n, d]` tensor.
    pub fn single(styles: &Tensor) -> Result<Self> {
        match *styles.shape() {
            [n, d] => Self::new(styles.reshape(&[1, n, d])?),
            _ => Err(Error::dim("style_tokens", format!("expected [n, d], got {:?}", styles.shape()))),
        }
    }

    pub fn batch(&self) -> usize {
        self.styles.shape()[0]
    }

    pub fn n(&self) -> usize {
        self.styles.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.styles.shape()[2]
    }

    /// The `i`-th set of the batch, as a batch of one.
    pub fn item(&self, i: usize) -> Result<Self> {
        Self::new(self.styles.narrow(0, i, 1)?)
    }

    /// Values of token `j` of batch entry `i`.
    pub fn token(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        if i >= self.batch() || j >= self.n() {
            return Err(Error::Contract(format!(
                "token ({i}, {j}) out of range for {:?}",
                self.styles.shape()
            )));
        }
        let d = self.width();
        let start = (i * self.n() + j) * d;
        Ok(self.styles.data()[start..start + d].to_vec())
    }

    /// Stacks several sets along the batch axis.
    pub fn stack(sets: &[StyleTokenSet]) -> Result<Self> {
        let parts: Vec<Tensor> = sets.iter().map(|s| s.styles.clone()).collect();
        Self::new(Tensor::concat(&parts, 0)?)
    }

    pub fn detach(&self) -> Self {
        StyleTokenSet {
            styles: self.styles.detach(),
        }
    }

    pub fn bit_eq(&self, other: &StyleTokenSet) -> bool {
        self.styles.bit_eq(&other.styles)
    }
}

/// Learnable keys paired with the style tokens in one style block.
#[derive(Debug, Clone)]
pub struct SemanticKeySet {
    pub keys: Tensor,
}

impl SemanticKeySet {
    pub fn new(keys: Tensor) -> Result<Self> {
        if keys.rank() != 2 {
            return Err(Error::dim("semantic_keys", format!("expected [n, d], got {:?}", keys.shape())));
        }
        Ok(SemanticKeySet { keys })
    }

    pub fn n(&self) -> usize {
        self.keys.shape()[0]
    }
}

/// Content-to-style attention weights of one style block, `[batch, m, n]`.
#[derive(Debug, Clone)]
pub struct AttentionMap {
    pub weights: Tensor,
    pub layer_index: usize,
    pub grid_h: usize,
    pub grid_w: usize,
}

impl AttentionMap {
    pub fn batch(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn m(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn n(&self) -> usize {
        self.weights.shape()[2]
    }

    /// Largest deviation of any row sum from 1, plus whether all weights are
    /// nonnegative.
    pub fn row_sum_error(&self) -> (f64, bool) {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for row in self.weights.data().chunks(n) {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
        }
        (worst, self.weights.data().iter().all(|&w| w >= 0.0))
    }

    /// The `[m, n]` matrix of batch entry `i`.
    pub fn matrix(&self, i: usize) -> Result<Tensor> {
        let (m, n) = (self.m(), self.n());
        self.weights.narrow(0, i, 1)?.reshape(&[m, n])
    }
}

/// Rearranges `[m, p²·c]` (or `[b, m, p²·c]`) tokens into a
/// `[c, grid_h·p, grid_w·p]` (or batched) image; each token fills its patch.
pub fn tokens_to_image(tokens: &Tensor, grid_h: usize, grid_w: usize, patch: usize, channels: usize) -> Result<Tensor> {
    let (batched, b) = match tokens.rank() {
        2 => (false, 1),
        3 => (true, tokens.shape()[0]),
        _ => return Err(Error::dim("tokens_to_image", format!("rank of {:?}", tokens.shape()))),
    };
    let dims = &tokens.shape()[tokens.rank() - 2..];
    if dims[0] != grid_h * grid_w || dims[1] != patch * patch * channels {
        return Err(Error::dim(
            "tokens_to_image",
            format!(
                "{:?} is not a {grid_h}×{grid_w} grid of {patch}×{patch}×{channels} patches",
                tokens.shape()
            ),
        ));
    }
    let img = tokens
        .reshape(&[b, grid_h, grid_w, patch, patch, channels])?
        .permute(&[0, 5, 1, 3, 2, 4])?;
    let (h, w) = (grid_h * patch, grid_w * patch);
    if batched {
        img.reshape(&[b, channels, h, w])
    } else {
        img.reshape(&[channels, h, w])
    }
}

/// Exact inverse of [`tokens_to_image`]: `[c, H, W]` → `[m, p²·c]`.
pub fn image_to_tokens(image: &Tensor, patch: usize) -> Result<Tensor> {
    let (batched, b, c, h, w) = match *image.shape() {
        [c, h, w] => (false, 1, c, h, w),
        [b, c, h, w] => (true, b, c, h, w),
        _ => return Err(Error::dim("image_to_tokens", format!("shape {:?}", image.shape()))),
    };
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(Error::dim(
            "image_to_tokens",
            format!("{h}×{w} image does not tile into {patch}×{patch} patches"),
        ));
    }
    let (gh, gw) = (h / patch, w / patch);
    let t = image
        .reshape(&[b, c, gh, patch, gw, patch])?
        .permute(&[0, 2, 4, 3, 5, 1])?;
    if batched {
        t.reshape(&[b, gh * gw, patch * patch * c])
    } else {
        t.reshape(&[gh * gw, patch * patch * c])
    }
}
