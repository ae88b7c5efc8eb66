use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adam::{Adam, AdamConfig};
use super::losses::{discriminator_loss, generator_loss, r1_from_scores, r1_weight};
use super::mixing::{mix_layers, mix_styles};
use super::toy::ToyDatasetSpec;
use crate::discriminator::Discriminator;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::nn::{global_norm, Parameterized};
use crate::tensor::{grad, no_grad, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub r1_gamma: f64,
    pub r1_interval: u64,
    pub mixing_prob: f64,
    /// Chance that a mixed pass also splits the layers between the latents.
    pub layer_mix_prob: f64,
    pub total_steps: u64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            lr_g: 2e-3,
            lr_d: 2e-3,
            beta1: 0.0,
            beta2: 0.99,
            adam_eps: 1e-8,
            r1_gamma: 1.0,
            r1_interval: 16,
            mixing_prob: 0.9,
            layer_mix_prob: 0.5,
            total_steps: 2000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let ok = self.batch_size >= 1
            && self.lr_g > 0.0
            && self.lr_d > 0.0
            && self.adam_eps > 0.0
            && self.r1_gamma >= 0.0
            && self.r1_interval >= 1
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && prob(self.mixing_prob)
            && prob(self.layer_mix_prob);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training config {self:?}")))
        }
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }
}

/// Scalars recorded for one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub loss_g: f64,
    pub loss_d: f64,
    /// Uncompensated R1 value; zero off the lazy cadence.
    pub r1: f64,
    pub grad_norm_g: f64,
    pub grad_norm_d: f64,
}

impl StepMetrics {
    pub const CSV_HEADER: &'static str = "step,loss_g,loss_d,r1,grad_norm_g,grad_norm_d";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.step, self.loss_g, self.loss_d, self.r1, self.grad_norm_g, self.grad_norm_d
        )
    }
}

/// Adversarial training state.
pub struct Trainer {
    pub config: TrainConfig,
    pub data: ToyDatasetSpec,
    pub gen: Generator,
    pub disc: Discriminator,
    opt_g: Adam,
    opt_d: Adam,
    step: u64,
}

fn grads_for<P: Parameterized + ?Sized>(loss: &Tensor, model: &P) -> Result<Vec<Tensor>> {
    let params = model.params();
    let refs: Vec<&Tensor> = params.iter().map(|(_, t)| *t).collect();
    grad(loss, &refs, false)
}

fn ensure_grads_finite(grads: &[Tensor], names: &[String]) -> Result<()> {
    for (g, name) in grads.iter().zip(names) {
        g.ensure_finite(&format!("gradient of {name}"))?;
    }
    Ok(())
}

impl Trainer {
    pub fn new(config: TrainConfig, data: ToyDatasetSpec, gen: Generator, disc: Discriminator) -> Result<Self> {
        config.validate()?;
        data.validate()?;
        let res = gen.synthesis.config.output_resolution();
        if disc.config.resolution != res || data.size != res {
            return Err(Error::Config(format!(
                "generator outputs {res}², critic expects {}², data is {}²",
                disc.config.resolution, data.size
            )));
        }
        let opt_g = Adam::new(config.adam(config.lr_g));
        let opt_d = Adam::new(config.adam(config.lr_d));
        Ok(Trainer {
            config,
            data,
            gen,
            disc,
            opt_g,
            opt_d,
            step: 0,
        })
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    fn latents(&self, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        let (b, d) = (self.config.batch_size, self.gen.latent_dim());
        let v: Vec<f64> = (0..b * d).map(|_| rng.sample(StandardNormal)).collect();
        Tensor::from_vec(v, &[b, d])
    }

    /// Style tensors per layer for the generator pass, with mixing applied.
    fn generator_styles(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Tensor>> {
        let a = self.gen.map(&self.latents(rng)?)?;
        if !rng.gen_bool(self.config.mixing_prob) {
            return self.gen.layer_styles(&a);
        }
        let b = self.gen.map(&self.latents(rng)?)?;
        let n = a.n();
        let mixed = if n > 1 { mix_styles(&a, &b, rng.gen_range(1..n))? } else { a.clone() };
        let layers = self.gen.num_layers();
        let mixed_layers = self.gen.layer_styles(&mixed)?;
        if layers > 1 && rng.gen_bool(self.config.layer_mix_prob) {
            let cut = rng.gen_range(1..layers);
            mix_layers(&mixed_layers, &self.gen.layer_styles(&b)?, cut)
        } else {
            Ok(mixed_layers)
        }
    }

    /// Critic update on one real batch and one detached fake batch, with the
    /// compensated R1 term on cadence steps. Returns (loss, r1, grad norm).
    pub fn discriminator_step(&mut self, rng: &mut ChaCha8Rng) -> Result<(f64, f64, f64)> {
        let b = self.config.batch_size as u64;
        let indices: Vec<u64> = (self.step * b..(self.step + 1) * b).collect();
        let fake = {
            let _guard = no_grad();
            self.gen.generate(&self.latents(rng)?)?
        };
        let weight = r1_weight(self.step, self.config.r1_interval);
        let real = self.data.batch(&indices)?.requires_grad_(weight > 0.0);
        let real_scores = self.disc.forward(&real)?;
        let fake_scores = self.disc.forward(&fake)?;
        let loss = discriminator_loss(&real_scores, &fake_scores)?;
        loss.ensure_finite("discriminator loss")?;
        let (total, r1) = if weight > 0.0 {
            let r1 = r1_from_scores(&real, &real_scores, self.config.r1_gamma)?;
            r1.ensure_finite("R1 penalty")?;
            (loss.add(&r1.mul_scalar(weight))?, r1.item()?)
        } else {
            (loss.clone(), 0.0)
        };
        let grads = grads_for(&total, &self.disc)?;
        let names: Vec<String> = self.disc.params().into_iter().map(|(n, _)| n).collect();
        ensure_grads_finite(&grads, &names)?;
        let norm = global_norm(&grads);
        self.opt_d.step(self.disc.params_mut(), &grads)?;
        Ok((loss.item()?, r1, norm))
    }

    /// Generator update through the current critic. Returns (loss, grad norm).
    pub fn generator_step(&mut self, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
        let styles = self.generator_styles(rng)?;
        let fake = self.gen.synthesis.forward_layers(&styles)?.image;
        let loss = generator_loss(&self.disc.forward(&fake)?);
        loss.ensure_finite("generator loss")?;
        let grads = grads_for(&loss, &self.gen)?;
        let names: Vec<String> = self.gen.params().into_iter().map(|(n, _)| n).collect();
        ensure_grads_finite(&grads, &names)?;
        let norm = global_norm(&grads);
        self.opt_g.step(self.gen.params_mut(), &grads)?;
        Ok((loss.item()?, norm))
    }

    /// One critic update followed by one generator update.
    pub fn train_step(&mut self) -> Result<StepMetrics> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(self.step);
        let (loss_d, r1, grad_norm_d) = self.discriminator_step(&mut rng)?;
        let (loss_g, grad_norm_g) = self.generator_step(&mut rng)?;
        let metrics = StepMetrics {
            step: self.step,
            loss_g,
            loss_d,
            r1,
            grad_norm_g,
            grad_norm_d,
        };
        self.step += 1;
        Ok(metrics)
    }
}
