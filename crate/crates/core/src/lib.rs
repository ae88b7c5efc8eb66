//! TokenGAN at desk scale: a token-based style generator trained as a GAN,
//! built on a small reverse-mode autodiff tensor.
//!
//! Content tokens are learned constants on a spatial grid. Style tokens come
//! from a mapping network and reach the content tokens through
//! cross-attention against learned semantic keys. The crate also holds the
//! training loop, the latent-space analysis tools and the plumbing used by
//! the `tokengan` command-line tool.

pub mod checkpoint;
pub mod checks;
pub mod cli;
pub mod config;
pub mod discriminator;
pub mod error;
pub mod generator;
pub mod image_io;
pub mod latent;
pub mod mapping;
pub mod nn;
pub mod style_block;
pub mod synthesis;
pub mod tensor;
pub mod tokens;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;

// Large short-lived activation buffers make the system allocator spend a
// noticeable share of each training step in page faults.
#[cfg(feature = "mimalloc")]
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;
