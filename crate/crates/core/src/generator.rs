//! Full generator: mapping network followed by the synthesis network.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mapping::{MappingConfig, MappingNetwork};
use crate::nn::Parameterized;
use crate::synthesis::{SynthesisConfig, SynthesisNetwork, Synthesized};
use crate::tensor::Tensor;
use crate::tokens::StyleTokenSet;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub synthesis: SynthesisConfig,
    pub mapping_depth: usize,
}

impl GeneratorConfig {
    pub fn mapping(&self) -> MappingConfig {
        MappingConfig {
            dim: self.synthesis.style_dim,
            depth: self.mapping_depth,
            n_styles: self.synthesis.n_style_tokens,
            sets: self.synthesis.style_sets(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.synthesis.style_dim
    }
}

#[derive(Debug, Clone)]
pub struct Generator {
    pub mapping: MappingNetwork,
    pub synthesis: SynthesisNetwork,
}

impl Generator {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, config: &GeneratorConfig) -> Result<Self> {
        config.synthesis.validate()?;
        let mapping = MappingNetwork::init(rng, config.mapping())?;
        let synthesis = SynthesisNetwork::init(rng, config.synthesis.clone())?;
        Ok(Generator { mapping, synthesis })
    }

    pub fn config(&self) -> GeneratorConfig {
        GeneratorConfig {
            synthesis: self.synthesis.config.clone(),
            mapping_depth: self.mapping.config.depth,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.mapping.config.dim
    }

    pub fn num_layers(&self) -> usize {
        self.synthesis.num_layers()
    }

    /// Style tokens for `[b, d]` latents.
    pub fn map(&self, z: &Tensor) -> Result<StyleTokenSet> {
        self.mapping.map(z)
    }

    pub fn synthesize(&self, styles: &StyleTokenSet) -> Result<Synthesized> {
        self.synthesis.forward(&styles.styles)
    }

    /// Images `[b, c, R, R]` for `[b, d]` latents.
    pub fn generate(&self, z: &Tensor) -> Result<Tensor> {
        Ok(self.synthesize(&self.map(z)?)?.image)
    }

    /// Style tensors handed to each block for one (possibly per-layer) set.
    pub fn layer_styles(&self, styles: &StyleTokenSet) -> Result<Vec<Tensor>> {
        let n = self.synthesis.config.n_style_tokens;
        let sets = self.synthesis.config.style_sets();
        if styles.n() != n * sets {
            return Err(Error::dim(
                "layer_styles",
                format!("{} style tokens, expected {}", styles.n(), n * sets),
            ));
        }
        if sets == 1 {
            Ok(vec![styles.styles.clone(); self.num_layers()])
        } else {
            (0..sets).map(|l| styles.styles.narrow(1, l * n, n)).collect()
        }
    }
}

impl Parameterized for Generator {
    fn collect_params<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        self.mapping.collect_params(out);
        self.synthesis.collect(out);
    }

    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.mapping.collect_params_mut(out);
        self.synthesis.collect_mut(out);
    }
}
