//! Central finite-difference gradient checking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{grad, Tensor};
use crate::error::{Error, Result};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Default relative tolerance.
pub const FD_TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error; gradients smaller than this are
/// compared in absolute terms, where finite-difference round-off dominates.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Number of scalar entries compared.
    pub checked: usize,
    /// (input index, flat element index) of the worst entry.
    pub worst: (usize, usize),
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Reduces any tensor to a scalar through a fixed random linear functional,
/// so every output entry contributes a distinct weight.
pub fn project_to_scalar(out: &Tensor, seed: u64) -> Result<Tensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = Tensor::randn(&mut rng, out.shape(), 1.0);
    Ok(out.mul(&weights)?.sum_all())
}

/// Compares autodiff gradients of `f` (which must return a scalar) against
/// central differences for every entry of every input.
pub fn check_gradients<F>(f: F, inputs: &[Tensor], step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&[Tensor]) -> Result<Tensor>,
{
    let leaves: Vec<Tensor> = inputs.iter().map(|t| t.detach().requires_grad_(true)).collect();
    let loss = f(&leaves)?;
    let refs: Vec<&Tensor> = leaves.iter().collect();
    let analytic = grad(&loss, &refs, false)?;

    // numeric probes run with grad mode on: `f` may itself take gradients
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
        worst: (0, 0),
        tolerance,
    };
    for (which, leaf) in leaves.iter().enumerate() {
        let base = leaf.to_vec();
        for i in 0..base.len() {
            let eval = |delta: f64| -> Result<f64> {
                let mut v = base.clone();
                v[i] += delta;
                let mut probe: Vec<Tensor> = leaves.iter().map(Tensor::detach).collect();
                probe[which] = Tensor::from_vec(v, leaf.shape())?;
                f(&probe)?.item()
            };
            let numeric = (eval(step)? - eval(-step)?) / (2.0 * step);
            let a = analytic[which].data()[i];
            if !numeric.is_finite() || !a.is_finite() {
                return Err(Error::NonFinite(format!("gradient check input {which} entry {i}")));
            }
            let rel = relative_error(a, numeric);
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (which, i);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
