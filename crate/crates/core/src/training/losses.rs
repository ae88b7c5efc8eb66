use crate::error::{Error, Result};
use crate::tensor::{grad, Tensor};

/// Non-saturating generator loss: mean softplus(−D(G(z))).
pub fn generator_loss(fake_scores: &Tensor) -> Tensor {
    fake_scores.neg().softplus().mean_all()
}

/// mean softplus(−D(x)) + mean softplus(D(G(z))).
pub fn discriminator_loss(real_scores: &Tensor, fake_scores: &Tensor) -> Result<Tensor> {
    real_scores.neg().softplus().mean_all().add(&fake_scores.softplus().mean_all())
}

/// R1 value `γ/2 · mean_i ‖∇ₓ D(xᵢ)‖²` given scores computed from `real`,
/// which must require gradients. The result stays differentiable in the
/// critic's parameters.
pub fn r1_from_scores(real: &Tensor, scores: &Tensor, gamma: f64) -> Result<Tensor> {
    if !real.requires_grad() {
        return Err(Error::Contract("R1 needs real images that require gradients".into()));
    }
    let b = real.shape().first().copied().unwrap_or(1).max(1);
    let g = grad(&scores.sum_all(), &[real], true)?.remove(0);
    Ok(g.square()?.sum_all().mul_scalar(0.5 * gamma / b as f64))
}

/// R1 penalty of critic `disc` on a real batch `[b, …]`.
pub fn r1_penalty<F>(real: &Tensor, disc: F, gamma: f64) -> Result<Tensor>
where
    F: Fn(&Tensor) -> Result<Tensor>,
{
    let x = real.detach().requires_grad_(true);
    let scores = disc(&x)?;
    r1_from_scores(&x, &scores, gamma)
}

/// Multiplier applied to R1 on a given step: `interval` on cadence steps,
/// zero elsewhere.
pub fn r1_weight(step: u64, interval: u64) -> f64 {
    if step.is_multiple_of(interval) {
        interval as f64
    } else {
        0.0
    }
}
