//! Procedural toy images: one colored ellipse or rectangle on a vertical
//! gradient background. Every image is a pure function of (spec, index).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Uniform-hue means of one RGB channel's HSV ramp term and its square.
const HUE_RAMP_MEAN: f64 = 0.5;
const HUE_RAMP_SQ_MEAN: f64 = 4.0 / 9.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDatasetSpec {
    pub size: usize,
    pub seed: u64,
    pub bg_saturation: f64,
    /// Background brightness at the top and bottom rows.
    pub bg_value_top: f64,
    pub bg_value_bottom: f64,
    pub shape_saturation: f64,
    pub shape_value: f64,
    /// Half-extent range of the shape, as fractions of the image size.
    pub scale_min: f64,
    pub scale_max: f64,
}

impl Default for ToyDatasetSpec {
    fn default() -> Self {
        ToyDatasetSpec {
            size: 32,
            seed: 0,
            bg_saturation: 0.4,
            bg_value_top: 0.15,
            bg_value_bottom: 0.45,
            shape_saturation: 0.8,
            shape_value: 0.9,
            scale_min: 0.15,
            scale_max: 0.3,
        }
    }
}

/// Factors drawn for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyFactors {
    pub ellipse: bool,
    pub shape_hue: f64,
    pub bg_hue: f64,
    pub half_w: f64,
    pub half_h: f64,
    pub cx: f64,
    pub cy: f64,
}

/// HSV to RGB, all components in [0, 1].
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let channel = |n: f64| {
        let k = (n + h * 6.0).rem_euclid(6.0);
        v * (1.0 - s * k.min(4.0 - k).clamp(0.0, 1.0))
    };
    [channel(5.0), channel(3.0), channel(1.0)]
}

impl ToyDatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let ok = self.size >= 4
            && [self.bg_saturation, self.bg_value_top, self.bg_value_bottom, self.shape_saturation, self.shape_value]
                .into_iter()
                .all(unit)
            && self.scale_min > 0.0
            && self.scale_min <= self.scale_max
            && self.scale_max <= 0.5;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid toy dataset spec {self:?}")))
        }
    }

    pub fn factors(&self, index: u64) -> ToyFactors {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let size = self.size as f64;
        let ellipse = rng.gen_bool(0.5);
        let shape_hue = rng.gen::<f64>();
        let bg_hue = rng.gen::<f64>();
        let mut extent = || size * rng.gen_range(self.scale_min..=self.scale_max);
        let half_w = extent();
        let half_h = extent();
        let cx = rng.gen_range(half_w..=size - half_w);
        let cy = rng.gen_range(half_h..=size - half_h);
        ToyFactors {
            ellipse,
            shape_hue,
            bg_hue,
            half_w,
            half_h,
            cx,
            cy,
        }
    }

    /// Background brightness of row `y`, sampled at the pixel centre.
    fn row_value(&self, y: usize) -> f64 {
        let u = (y as f64 + 0.5) / self.size as f64;
        self.bg_value_top + (self.bg_value_bottom - self.bg_value_top) * u
    }

    /// Image `index` as `[3, size, size]` values in [−1, 1].
    pub fn image(&self, index: u64) -> Vec<f64> {
        let f = self.factors(index);
        let n = self.size;
        let shape_rgb = hsv_to_rgb(f.shape_hue, self.shape_saturation, self.shape_value);
        let mut out = vec![0.0; 3 * n * n];
        for y in 0..n {
            let bg = hsv_to_rgb(f.bg_hue, self.bg_saturation, self.row_value(y));
            let dy = (y as f64 + 0.5 - f.cy) / f.half_h;
            for x in 0..n {
                let dx = (x as f64 + 0.5 - f.cx) / f.half_w;
                let inside = if f.ellipse {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                let rgb = if inside { shape_rgb } else { bg };
                for (c, v) in rgb.iter().enumerate() {
                    out[(c * n + y) * n + x] = 2.0 * v - 1.0;
                }
            }
        }
        out
    }

    /// Batch `[b, 3, size, size]` of the given indices.
    pub fn batch(&self, indices: &[u64]) -> Result<Tensor> {
        let n = self.size;
        let mut data = Vec::with_capacity(indices.len() * 3 * n * n);
        for &i in indices {
            data.extend(self.image(i));
        }
        Tensor::from_vec(data, &[indices.len(), 3, n, n])
    }

    /// Expected fraction of the image covered by the shape.
    pub fn expected_area_fraction(&self) -> f64 {
        let mean_half = 0.5 * (self.scale_min + self.scale_max);
        // ellipse πab and rectangle 4ab with equal odds, a and b independent
        (0.5 * std::f64::consts::PI + 2.0) * mean_half * mean_half
    }

    /// Per-channel pixel mean and std in [−1, 1] units implied by the
    /// uniform factor ranges (identical for the three channels).
    pub fn analytic_channel_stats(&self) -> (f64, f64) {
        let n = self.size;
        let (mut v1, mut v2) = (0.0, 0.0);
        for y in 0..n {
            let v = self.row_value(y);
            v1 += v;
            v2 += v * v;
        }
        v1 /= n as f64;
        v2 /= n as f64;
        let moment = |s: f64| (1.0 - s * HUE_RAMP_MEAN, 1.0 - 2.0 * s * HUE_RAMP_MEAN + s * s * HUE_RAMP_SQ_MEAN);
        let (bg1, bg2) = moment(self.bg_saturation);
        let (sh1, sh2) = moment(self.shape_saturation);
        let a = self.expected_area_fraction();
        let mean = (1.0 - a) * v1 * bg1 + a * self.shape_value * sh1;
        let second = (1.0 - a) * v2 * bg2 + a * self.shape_value * self.shape_value * sh2;
        let var = (second - mean * mean).max(0.0);
        (2.0 * mean - 1.0, 2.0 * var.sqrt())
    }
}

/// Per-channel mean and std of a `[b, c, H, W]` batch.
pub fn channel_stats(images: &Tensor) -> Result<Vec<(f64, f64)>> {
    let [b, c, h, w] = match *images.shape() {
        [b, c, h, w] => [b, c, h, w],
        _ => return Err(Error::dim("channel_stats", format!("shape {:?}", images.shape()))),
    };
    let plane = h * w;
    let count = (b * plane) as f64;
    let mut out = Vec::with_capacity(c);
    for ch in 0..c {
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..b {
            let start = (i * c + ch) * plane;
            for &v in &images.data()[start..start + plane] {
                s1 += v;
                s2 += v * v;
            }
        }
        let mean = s1 / count;
        out.push((mean, (s2 / count - mean * mean).max(0.0).sqrt()));
    }
    Ok(out)
}
