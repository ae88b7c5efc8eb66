//! Layer building blocks and named-parameter plumbing.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Negative slope used by every leaky ReLU in the models.
pub const LRELU_SLOPE: f64 = 0.2;

/// Anything holding learnable tensors under stable dotted names.
pub trait Parameterized {
    /// Appends `(name, tensor)` pairs in a fixed order.
    fn collect_params<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>);
    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>);

    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        self.collect_params_mut(&mut out);
        out
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Replaces every parameter with the same-named tensor from `lookup`,
    /// checking shapes. The new tensors become trainable leaves.
    fn load_params(&mut self, lookup: &dyn Fn(&str) -> Option<Tensor>) -> Result<()> {
        for (name, slot) in self.params_mut() {
            let t = lookup(&name).ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Format(format!(
                    "tensor {name} has shape {:?}, model expects {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.detach().requires_grad_(true);
        }
        Ok(())
    }
}

/// Fully connected layer, weight stored `[out, in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Weights from N(0, 1/fan_in), zero bias.
    pub fn init<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize) -> Self {
        Linear {
            weight: Tensor::randn(rng, &[fan_out, fan_in], 1.0 / (fan_in as f64).sqrt()).requires_grad_(true),
            bias: Tensor::zeros(&[fan_out]).requires_grad_(true),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        if weight.rank() != 2 || bias.shape() != [weight.shape()[0]] {
            return Err(Error::dim(
                "linear",
                format!("weight {:?} with bias {:?}", weight.shape(), bias.shape()),
            ));
        }
        Ok(Linear { weight, bias })
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    /// Applies the layer to the last axis of `x`, any rank ≥ 1.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let shape = x.shape();
        let Some((&last, lead)) = shape.split_last() else {
            return Err(Error::dim("linear", "scalar input".to_string()));
        };
        if last != self.in_features() {
            return Err(Error::dim(
                "linear",
                format!("input {:?} against weight {:?}", shape, self.weight.shape()),
            ));
        }
        let rows: usize = lead.iter().product();
        let y = x.reshape(&[rows, last])?.linear(&self.weight, Some(&self.bias))?;
        let mut out_shape = lead.to_vec();
        out_shape.push(self.out_features());
        y.reshape(&out_shape)
    }

    pub fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.w"), &self.weight));
        out.push((format!("{prefix}.b"), &self.bias));
    }

    pub fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.w"), &mut self.weight));
        out.push((format!("{prefix}.b"), &mut self.bias));
    }
}

/// Global L2 norm over a list of gradients.
pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads
        .iter()
        .flat_map(|g| g.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}
