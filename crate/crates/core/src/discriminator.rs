//! Small convolutional critic scoring `[b, c, R, R]` images.
//!
//! fromRGB (1×1) then, per level down to 4×4, a 3×3 convolution with
//! leaky ReLU and 2× average pooling; a dense layer maps the 4×4 features
//! to one score per image.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Linear, Parameterized, LRELU_SLOPE};
use crate::tensor::Tensor;

/// Spatial size at which the conv stack stops.
pub const FINAL_RESOLUTION: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscConfig {
    pub resolution: usize,
    pub channels: usize,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct Discriminator {
    pub config: DiscConfig,
    pub from_rgb: Linear,
    /// 3×3 convolutions as `[width, 9·width]` patch maps, one per level.
    pub convs: Vec<Linear>,
    pub dense: Linear,
}

impl Discriminator {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, config: DiscConfig) -> Result<Self> {
        let r = config.resolution;
        if r < FINAL_RESOLUTION || !r.is_power_of_two() || config.width == 0 || config.channels == 0 {
            return Err(Error::Config(format!("invalid discriminator config {config:?}")));
        }
        let w = config.width;
        let levels = (r / FINAL_RESOLUTION).trailing_zeros() as usize;
        let from_rgb = Linear::init(rng, config.channels, w);
        let convs = (0..levels).map(|_| Linear::init(rng, 9 * w, w)).collect();
        let dense = Linear::init(rng, FINAL_RESOLUTION * FINAL_RESOLUTION * w, 1);
        Ok(Discriminator {
            config,
            from_rgb,
            convs,
            dense,
        })
    }

    /// Scores `[b, c, R, R]` images, returning `[b]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let DiscConfig { resolution: r, channels: c, width: w } = self.config;
        let b = match *x.shape() {
            [b, cc, h, ww] if cc == c && h == r && ww == r => b,
            _ => {
                return Err(Error::dim(
                    "discriminate",
                    format!("image {:?}, expected [batch, {c}, {r}, {r}]", x.shape()),
                ))
            }
        };
        let mut h = self.from_rgb.forward(&x.permute(&[0, 2, 3, 1])?)?.leaky_relu(LRELU_SLOPE);
        let mut side = r;
        for conv in &self.convs {
            let cols = h.im2col3x3()?;
            h = conv
                .forward(&cols)?
                .leaky_relu(LRELU_SLOPE)
                .reshape(&[b, side, side, w])?
                .avg_pool2x()?;
            side /= 2;
        }
        let flat = h.reshape(&[b, side * side * w])?;
        self.dense.forward(&flat)?.reshape(&[b])
    }

    /// Score of a single `[c, R, R]` image.
    pub fn discriminate(&self, x: &Tensor) -> Result<Tensor> {
        let mut shape = vec![1];
        shape.extend_from_slice(x.shape());
        self.forward(&x.reshape(&shape)?)?.reshape(&[])
    }
}

impl Parameterized for Discriminator {
    fn collect_params<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        self.from_rgb.collect("disc.fromrgb", out);
        for (i, c) in self.convs.iter().enumerate() {
            c.collect(&format!("disc.conv.{i}"), out);
        }
        self.dense.collect("disc.dense", out);
    }

    fn collect_params_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        self.from_rgb.collect_mut("disc.fromrgb", out);
        for (i, c) in self.convs.iter_mut().enumerate() {
            c.collect_mut(&format!("disc.conv.{i}"), out);
        }
        self.dense.collect_mut("disc.dense", out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::{check_gradients, FD_STEP, FD_TOLERANCE};
    use crate::tensor::grad;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn disc(r: usize, seed: u64) -> Discriminator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Discriminator::init(&mut rng, DiscConfig { resolution: r, channels: 3, width: 4 }).unwrap()
    }

    #[test]
    fn scores_are_scalar_and_deterministic() {
        let d = disc(16, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::randn(&mut rng, &[3, 3, 16, 16], 1.0);
        let s = d.forward(&x).unwrap();
        assert_eq!(s.shape(), &[3]);
        assert!(s.bit_eq(&d.forward(&x).unwrap()));
        let one = d.discriminate(&x.narrow(0, 1, 1).unwrap().reshape(&[3, 16, 16]).unwrap()).unwrap();
        assert_eq!(one.shape(), &[] as &[usize]);
        assert!((one.item().unwrap() - s.data()[1]).abs() < 1e-12);
    }

    #[test]
    fn wrong_resolution_is_rejected() {
        let d = disc(8, 1);
        assert!(matches!(d.forward(&Tensor::zeros(&[1, 3, 16, 16])), Err(Error::Dimension { .. })));
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let d = disc(8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::randn(&mut rng, &[1, 3, 8, 8], 1.0);
        let report = check_gradients(|v| d.discriminate(&v[0].reshape(&[3, 8, 8])?), &[x], FD_STEP, FD_TOLERANCE).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let d = disc(8, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = Tensor::randn(&mut rng, &[2, 3, 8, 8], 1.0);
        let report = check_gradients(
            |v| {
                let mut dd = d.clone();
                dd.convs[0].weight = v[0].clone();
                dd.from_rgb.weight = v[1].clone();
                Ok(dd.forward(&x)?.sum_all())
            },
            &[d.convs[0].weight.clone(), d.from_rgb.weight.clone()],
            FD_STEP,
            FD_TOLERANCE,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn input_gradient_is_finite_and_score_responds_to_input() {
        let d = disc(16, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Tensor::randn(&mut rng, &[2, 3, 16, 16], 1.0).requires_grad_(true);
        let g = grad(&d.forward(&x).unwrap().sum_all(), &[&x], false).unwrap();
        assert!(g[0].all_finite());
        let delta = Tensor::randn(&mut rng, &[2, 3, 16, 16], 0.1);
        let moved = d.forward(&x.add(&delta).unwrap()).unwrap();
        let s = d.forward(&x).unwrap();
        assert!(s.data().iter().zip(moved.data()).all(|(a, b)| a != b));
    }
}
