//! Plain-text `key=value` run configuration.
//!
//! One file describes the architecture, the training run and the toy data.
//! Blank lines and `#` comments are ignored, keys may appear in any order,
//! missing keys keep their defaults and unknown keys are errors.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::discriminator::{DiscConfig, Discriminator};
use crate::error::{Error, Result};
use crate::generator::{Generator, GeneratorConfig};
use crate::style_block::NormKind;
use crate::synthesis::{SynthesisConfig, TokenUpsample};
use crate::training::{ToyDatasetSpec, TrainConfig};

/// Desk-scale token width.
pub const DEFAULT_WIDTH: usize = 64;
/// Desk-scale critic width.
pub const DEFAULT_DISC_WIDTH: usize = 32;
/// Desk-scale batch; half the full-scale 32 keeps 2000 steps within half an
/// hour on one core.
pub const DEFAULT_BATCH: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub generator: GeneratorConfig,
    pub disc_width: usize,
    pub train: TrainConfig,
    pub data: ToyDatasetSpec,
    /// Steps between checkpoints written by a training run (0 = final only).
    pub checkpoint_every: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synthesis = SynthesisConfig::uniform(vec![4, 8, 16, 32], DEFAULT_WIDTH, 1, 8);
        RunConfig {
            generator: GeneratorConfig {
                synthesis,
                mapping_depth: 4,
            },
            disc_width: DEFAULT_DISC_WIDTH,
            train: TrainConfig {
                batch_size: DEFAULT_BATCH,
                ..TrainConfig::default()
            },
            data: ToyDatasetSpec::default(),
            checkpoint_every: 500,
        }
    }
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| parse_value(key, s)).collect()
}

impl RunConfig {
    /// Halves every token-grid side by using 2×2 patches everywhere.
    pub fn with_halved_m(mut self) -> Self {
        let k = self.generator.synthesis.resolutions.len();
        self.generator.synthesis.patch_sizes = vec![2; k];
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.synthesis.validate()?;
        self.train.validate()?;
        self.data.validate()?;
        if self.generator.mapping_depth == 0 || self.disc_width == 0 {
            return Err(Error::Config("mapping depth and critic width must be positive".into()));
        }
        if self.data.size != self.generator.synthesis.output_resolution() {
            return Err(Error::Config(format!(
                "data size {} differs from output resolution {}",
                self.data.size,
                self.generator.synthesis.output_resolution()
            )));
        }
        Ok(())
    }

    pub fn disc_config(&self) -> DiscConfig {
        DiscConfig {
            resolution: self.generator.synthesis.output_resolution(),
            channels: self.generator.synthesis.image_channels,
            width: self.disc_width,
        }
    }

    /// Freshly initialized networks; a pure function of the config.
    pub fn build_models(&self) -> Result<(Generator, Discriminator)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.train.seed);
        rng.set_stream(u64::MAX);
        let gen = Generator::init(&mut rng, &self.generator)?;
        let disc = Discriminator::init(&mut rng, self.disc_config())?;
        Ok((gen, disc))
    }

    pub fn render(&self) -> String {
        let s = &self.generator.synthesis;
        let t = &self.train;
        let d = &self.data;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("resolutions", list(&s.resolutions));
        kv("blocks_per_resolution", s.blocks_per_resolution.to_string());
        kv("widths", list(&s.widths));
        kv("patch_sizes", list(&s.patch_sizes));
        kv("n_style_tokens", s.n_style_tokens.to_string());
        kv("style_dim", s.style_dim.to_string());
        kv("image_channels", s.image_channels.to_string());
        kv("norm", s.norm.as_str().into());
        kv("heads", s.heads.to_string());
        kv("token_upsample", s.token_upsample.as_str().into());
        kv("per_layer_styles", s.per_layer_styles.to_string());
        kv("mapping_depth", self.generator.mapping_depth.to_string());
        kv("disc_width", self.disc_width.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("lr_g", t.lr_g.to_string());
        kv("lr_d", t.lr_d.to_string());
        kv("beta1", t.beta1.to_string());
        kv("beta2", t.beta2.to_string());
        kv("adam_eps", t.adam_eps.to_string());
        kv("r1_gamma", t.r1_gamma.to_string());
        kv("r1_interval", t.r1_interval.to_string());
        kv("mixing_prob", t.mixing_prob.to_string());
        kv("layer_mix_prob", t.layer_mix_prob.to_string());
        kv("total_steps", t.total_steps.to_string());
        kv("seed", t.seed.to_string());
        kv("checkpoint_every", self.checkpoint_every.to_string());
        kv("data_size", d.size.to_string());
        kv("data_seed", d.seed.to_string());
        kv("bg_saturation", d.bg_saturation.to_string());
        kv("bg_value_top", d.bg_value_top.to_string());
        kv("bg_value_bottom", d.bg_value_bottom.to_string());
        kv("shape_saturation", d.shape_saturation.to_string());
        kv("shape_value", d.shape_value.to_string());
        kv("scale_min", d.scale_min.to_string());
        kv("scale_max", d.scale_max.to_string());
        out
    }

    /// Parses over the defaults. Validation is left to [`RunConfig::validate`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
            cfg.set(key.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.generator.synthesis;
        let t = &mut self.train;
        let d = &mut self.data;
        match key {
            "resolutions" => s.resolutions = parse_list(key, v)?,
            "blocks_per_resolution" => s.blocks_per_resolution = parse_value(key, v)?,
            "widths" => s.widths = parse_list(key, v)?,
            "patch_sizes" => s.patch_sizes = parse_list(key, v)?,
            "n_style_tokens" => s.n_style_tokens = parse_value(key, v)?,
            "style_dim" => s.style_dim = parse_value(key, v)?,
            "image_channels" => s.image_channels = parse_value(key, v)?,
            "norm" => s.norm = NormKind::from_str(v)?,
            "heads" => s.heads = parse_value(key, v)?,
            "token_upsample" => s.token_upsample = TokenUpsample::from_str(v)?,
            "per_layer_styles" => s.per_layer_styles = parse_value(key, v)?,
            "mapping_depth" => self.generator.mapping_depth = parse_value(key, v)?,
            "disc_width" => self.disc_width = parse_value(key, v)?,
            "batch_size" => t.batch_size = parse_value(key, v)?,
            "lr_g" => t.lr_g = parse_value(key, v)?,
            "lr_d" => t.lr_d = parse_value(key, v)?,
            "beta1" => t.beta1 = parse_value(key, v)?,
            "beta2" => t.beta2 = parse_value(key, v)?,
            "adam_eps" => t.adam_eps = parse_value(key, v)?,
            "r1_gamma" => t.r1_gamma = parse_value(key, v)?,
            "r1_interval" => t.r1_interval = parse_value(key, v)?,
            "mixing_prob" => t.mixing_prob = parse_value(key, v)?,
            "layer_mix_prob" => t.layer_mix_prob = parse_value(key, v)?,
            "total_steps" => t.total_steps = parse_value(key, v)?,
            "seed" => t.seed = parse_value(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse_value(key, v)?,
            "data_size" => d.size = parse_value(key, v)?,
            "data_seed" => d.seed = parse_value(key, v)?,
            "bg_saturation" => d.bg_saturation = parse_value(key, v)?,
            "bg_value_top" => d.bg_value_top = parse_value(key, v)?,
            "bg_value_bottom" => d.bg_value_bottom = parse_value(key, v)?,
            "shape_saturation" => d.shape_saturation = parse_value(key, v)?,
            "shape_value" => d.shape_value = parse_value(key, v)?,
            "scale_min" => d.scale_min = parse_value(key, v)?,
            "scale_max" => d.scale_max = parse_value(key, v)?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
