//! Latent-space analysis: style editing, interpolation, GAN inversion and
//! attention heat maps.

use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::mapping::{sample_latent, sample_latents};
use crate::tensor::{grad, no_grad, Tensor};
use crate::tokens::{AttentionMap, StyleTokenSet};
use crate::training::{Adam, AdamConfig};

/// Copy of `styles` with token `j` replaced by `value` (length d) in every
/// batch entry. The result is detached.
pub fn edit_style(styles: &StyleTokenSet, j: usize, value: &[f64]) -> Result<StyleTokenSet> {
    let (b, n, d) = (styles.batch(), styles.n(), styles.width());
    if j >= n {
        return Err(Error::Contract(format!("style token {j} out of range for n={n}")));
    }
    if value.len() != d {
        return Err(Error::dim("edit_style", format!("value of length {}, tokens have width {d}", value.len())));
    }
    let mut data = styles.styles.to_vec();
    for i in 0..b {
        let at = (i * n + j) * d;
        data[at..at + d].copy_from_slice(value);
    }
    StyleTokenSet::new(Tensor::from_vec(data, styles.styles.shape())?)
}

/// Per-token blend `α·s1 + (1 − α)·s2`. The endpoints return the inputs
/// themselves so that α = 1 and α = 0 reproduce them bit for bit. Values of
/// α outside [0, 1] extrapolate.
pub fn interpolate(s1: &StyleTokenSet, s2: &StyleTokenSet, alpha: f64) -> Result<StyleTokenSet> {
    if s1.styles.shape() != s2.styles.shape() {
        return Err(Error::dim(
            "interpolate",
            format!("{:?} vs {:?}", s1.styles.shape(), s2.styles.shape()),
        ));
    }
    if alpha == 1.0 {
        return Ok(s1.clone());
    }
    if alpha == 0.0 {
        return Ok(s2.clone());
    }
    let blended = s1.styles.mul_scalar(alpha).add(&s2.styles.mul_scalar(1.0 - alpha))?;
    StyleTokenSet::new(blended)
}

/// Style set of latent `seed`, as sampled by the command-line tools.
pub fn styles_for_seed(gen: &Generator, seed: u64) -> Result<StyleTokenSet> {
    let _g = no_grad();
    let z = sample_latent(seed, gen.latent_dim());
    gen.map(&z.reshape(&[1, gen.latent_dim()])?)
}

/// Mean of `count` mapped latents drawn from consecutive seeds.
pub fn mean_styles(gen: &Generator, count: usize, first_seed: u64) -> Result<StyleTokenSet> {
    if count == 0 {
        return Err(Error::Contract("mean of zero style sets".into()));
    }
    let _g = no_grad();
    const CHUNK: usize = 250;
    let mut total: Option<Tensor> = None;
    let mut done = 0;
    while done < count {
        let k = CHUNK.min(count - done);
        let z = sample_latents(first_seed + done as u64, k, gen.latent_dim())?;
        let s = gen.mapping.forward(&z)?.sum_axis(0, true)?;
        total = Some(match total {
            None => s,
            Some(t) => t.add(&s)?,
        });
        done += k;
    }
    StyleTokenSet::new(total.expect("count > 0").mul_scalar(1.0 / count as f64))
}

/// Renders one style set (batch 1) to a `[c, R, R]` image without recording.
pub fn render(gen: &Generator, styles: &StyleTokenSet) -> Result<Tensor> {
    let _g = no_grad();
    let img = gen.synthesize(styles)?.image;
    let s = img.shape().to_vec();
    img.narrow(0, 0, 1)?.reshape(&s[1..])
}

/// Mean squared error of two equally shaped tensors.
pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape("mse", a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.numel() as f64)
}

/// Mean absolute error on the [0, 255] pixel scale.
pub fn mean_absolute_error(a: &Tensor, b: &Tensor) -> Result<f64> {
    same_shape("mean_absolute_error", a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    Ok(127.5 * sum / a.numel() as f64)
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::dim(op, format!("{:?} vs {:?}", a.shape(), b.shape())))
    }
}

/// Where an inversion searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionSpace {
    /// Style tokens directly.
    Style,
    /// Input latents, passed through the mapping network.
    Latent,
}

/// Starting point of an inversion.
#[derive(Debug, Clone)]
pub enum InversionInit {
    /// Mean of this many mapped latents (style space) or the zero-mean
    /// prior's sample for `seed` (latent space).
    MeanStyle(usize),
    /// The mapped (or raw) latent of a seed.
    Seed(u64),
    /// Explicit style tokens; style space only.
    Styles(StyleTokenSet),
}

#[derive(Debug, Clone)]
pub struct InversionConfig {
    pub iterations: usize,
    pub lr: f64,
    pub space: InversionSpace,
    pub init: InversionInit,
    /// Seed used by the latent-space mean-style start.
    pub seed: u64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            iterations: 500,
            lr: 0.05,
            space: InversionSpace::Style,
            init: InversionInit::MeanStyle(1000),
            seed: 0,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || !(self.lr > 0.0) {
            return Err(Error::Config(format!(
                "inversion needs iterations ≥ 1 and a positive step size, got {} and {}",
                self.iterations, self.lr
            )));
        }
        if self.space == InversionSpace::Latent && matches!(self.init, InversionInit::Styles(_)) {
            return Err(Error::Config("latent-space inversion cannot start from style tokens".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Inversion {
    /// Best styles found, batch 1.
    pub styles: StyleTokenSet,
    /// Latent behind `styles` for latent-space runs.
    pub latent: Option<Tensor>,
    /// Loss at the start of every iteration.
    pub mse_curve: Vec<f64>,
    pub best_mse: f64,
    /// Rendering of `styles`.
    pub image: Tensor,
}

impl Inversion {
    /// Running minimum of the loss curve.
    pub fn running_min(&self) -> Vec<f64> {
        self.mse_curve
            .iter()
            .scan(f64::INFINITY, |m, &v| {
                *m = m.min(v);
                Some(*m)
            })
            .collect()
    }
}

/// Gradient descent with Adam on style tokens (or latents) minimizing the
/// pixel MSE to `target` (`[c, R, R]`). Returns the best iterate.
pub fn invert(target: &Tensor, gen: &Generator, config: &InversionConfig) -> Result<Inversion> {
    config.validate()?;
    let cfg = gen.config();
    let (c, r) = (cfg.synthesis.image_channels, cfg.synthesis.output_resolution());
    if target.shape() != [c, r, r] {
        return Err(Error::dim(
            "invert",
            format!("target {:?}, generator renders [{c}, {r}, {r}]", target.shape()),
        ));
    }
    let d = gen.latent_dim();
    let mut param = match (config.space, &config.init) {
        (InversionSpace::Style, InversionInit::MeanStyle(k)) => mean_styles(gen, *k, config.seed)?.styles,
        (InversionSpace::Style, InversionInit::Seed(s)) => styles_for_seed(gen, *s)?.styles,
        (InversionSpace::Style, InversionInit::Styles(s)) => {
            if s.batch() != 1 {
                return Err(Error::Contract("inversion starts from a single style set".into()));
            }
            s.styles.clone()
        }
        (InversionSpace::Latent, InversionInit::MeanStyle(_)) => sample_latent(config.seed, d).reshape(&[1, d])?,
        (InversionSpace::Latent, InversionInit::Seed(s)) => sample_latent(*s, d).reshape(&[1, d])?,
        (InversionSpace::Latent, InversionInit::Styles(_)) => unreachable!("rejected by validate"),
    }
    .detach()
    .requires_grad_(true);
    let target = target.detach().reshape(&[1, c, r, r])?;
    let styles_of = |p: &Tensor| -> Result<StyleTokenSet> {
        match config.space {
            InversionSpace::Style => StyleTokenSet::new(p.clone()),
            InversionSpace::Latent => gen.map(p),
        }
    };

    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    });
    let mut curve = Vec::with_capacity(config.iterations);
    let mut best: Option<(f64, Tensor)> = None;
    for it in 0..config.iterations {
        let image = gen.synthesize(&styles_of(&param)?)?.image;
        let loss = image.sub(&target)?.square()?.mean_all();
        loss.ensure_finite(&format!("inversion loss at iteration {it}"))?;
        let value = loss.item()?;
        curve.push(value);
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, param.detach()));
        }
        if it + 1 == config.iterations || value == 0.0 {
            break;
        }
        let g = grad(&loss, &[&param], false)?;
        g[0].ensure_finite("inversion gradient")?;
        adam.step(vec![("inversion".into(), &mut param)], &g)?;
    }
    let (best_mse, best_param) = best.expect("at least one iteration");
    let (styles, latent) = {
        let _g = no_grad();
        match config.space {
            InversionSpace::Style => (StyleTokenSet::new(best_param)?, None),
            InversionSpace::Latent => (gen.map(&best_param)?, Some(best_param)),
        }
    };
    let image = render(gen, &styles)?;
    Ok(Inversion {
        styles,
        latent,
        mse_curve: curve,
        best_mse,
        image,
    })
}

/// MSE between the renderings of `pairs` disjoint pairs of random latents
/// (seeds `first_seed..first_seed + 2·pairs`).
pub fn pair_mse_baseline(gen: &Generator, pairs: usize, first_seed: u64) -> Result<Vec<f64>> {
    let _g = no_grad();
    let mut out = Vec::with_capacity(pairs);
    const CHUNK: usize = 20;
    let mut done = 0;
    while done < pairs {
        let k = CHUNK.min(pairs - done);
        let z = sample_latents(first_seed + 2 * done as u64, 2 * k, gen.latent_dim())?;
        let imgs = gen.generate(&z)?;
        let plane = imgs.numel() / (2 * k);
        let data = imgs.data();
        for i in 0..k {
            let a = &data[2 * i * plane..(2 * i + 1) * plane];
            let b = &data[(2 * i + 1) * plane..(2 * i + 2) * plane];
            out.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / plane as f64);
        }
        done += k;
    }
    Ok(out)
}

/// Linear-interpolated percentile `q ∈ [0, 100]` of `values`.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=100.0).contains(&q) {
        return Err(Error::Contract(format!("percentile {q} of {} values", values.len())));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Attention of one style block and its per-token heat maps.
#[derive(Debug, Clone)]
pub struct AttentionHeatMaps {
    pub map: AttentionMap,
    /// One `[R, R]` map per style token, before normalization.
    pub raw: Vec<Tensor>,
    /// `raw` divided by its maximum, for rendering.
    pub normalized: Vec<Tensor>,
}

/// Attention of layer `layer` for a single style set, with each token's
/// column laid out on the layer's grid and nearest-upsampled to the output
/// resolution.
pub fn extract_attention(gen: &Generator, styles: &StyleTokenSet, layer: usize) -> Result<AttentionHeatMaps> {
    let layers = gen.num_layers();
    if layer >= layers {
        return Err(Error::Contract(format!("layer {layer} out of range for {layers} layers")));
    }
    if styles.batch() != 1 {
        return Err(Error::Contract("attention extraction takes a single style set".into()));
    }
    let out = {
        let _g = no_grad();
        gen.synthesize(styles)?
    };
    let map = out.attention[layer].clone();
    let r = gen.config().synthesis.output_resolution();
    let (gh, gw, n) = (map.grid_h, map.grid_w, map.n());
    let w = map.weights.data();
    let mut raw = Vec::with_capacity(n);
    let mut normalized = Vec::with_capacity(n);
    for j in 0..n {
        let mut pix = Vec::with_capacity(r * r);
        for y in 0..r {
            let gy = y * gh / r;
            for x in 0..r {
                let gx = x * gw / r;
                pix.push(w[(gy * gw + gx) * n + j]);
            }
        }
        let max = pix.iter().copied().fold(0.0, f64::max);
        let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
        normalized.push(Tensor::from_vec(pix.iter().map(|v| v * scale).collect(), &[r, r])?);
        raw.push(Tensor::from_vec(pix, &[r, r])?);
    }
    Ok(AttentionHeatMaps { map, raw, normalized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::GeneratorConfig;
    use crate::synthesis::SynthesisConfig;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(v: Vec<f64>, n: usize, d: usize) -> StyleTokenSet {
        StyleTokenSet::new(Tensor::from_vec(v, &[1, n, d]).unwrap()).unwrap()
    }

    fn small_gen(n: usize) -> Generator {
        let mut s = SynthesisConfig::uniform(vec![4, 8], 4, 1, n);
        s.blocks_per_resolution = 1;
        let cfg = GeneratorConfig {
            synthesis: s,
            mapping_depth: 2,
        };
        Generator::init(&mut ChaCha8Rng::seed_from_u64(3), &cfg).unwrap()
    }

    #[test]
    fn edit_with_the_same_value_is_a_no_op() {
        let s = set(vec![1.0, 2.0, 3.0, 4.0], 2, 2);
        let same = edit_style(&s, 1, &[3.0, 4.0]).unwrap();
        assert!(same.bit_eq(&s));
        let edited = edit_style(&s, 0, &[9.0, 9.0]).unwrap();
        assert_eq!(edited.styles.data(), &[9.0, 9.0, 3.0, 4.0]);
        let restored = edit_style(&edited, 0, &[1.0, 2.0]).unwrap();
        assert!(restored.bit_eq(&s));
        assert!(matches!(edit_style(&s, 2, &[0.0, 0.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn interpolation_examples() {
        let a = set(vec![2.0], 1, 1);
        let b = set(vec![4.0], 1, 1);
        assert_eq!(interpolate(&a, &b, 0.5).unwrap().styles.data(), &[3.0]);
        assert!(interpolate(&a, &b, 1.0).unwrap().bit_eq(&a));
        assert!(interpolate(&a, &b, 0.0).unwrap().bit_eq(&b));
        let wide = set(vec![0.0, 0.0], 2, 1);
        assert!(interpolate(&a, &wide, 0.5).is_err());
    }

    #[test]
    fn error_metrics_on_extremes() {
        let lo = Tensor::full(&[3, 2, 2], -1.0);
        let hi = Tensor::full(&[3, 2, 2], 1.0);
        let mid = Tensor::zeros(&[3, 2, 2]);
        assert_eq!(mean_absolute_error(&hi, &hi).unwrap(), 0.0);
        assert_eq!(mean_absolute_error(&lo, &hi).unwrap(), 255.0);
        assert_eq!(mean_absolute_error(&mid, &hi).unwrap(), 127.5);
        assert_eq!(mse(&lo, &hi).unwrap(), 4.0);
        assert!(mse(&lo, &Tensor::zeros(&[3, 2])).is_err());
    }

    #[test]
    fn inversion_from_the_truth_stays_at_zero() {
        let gen = small_gen(3);
        let s0 = styles_for_seed(&gen, 7).unwrap();
        let target = render(&gen, &s0).unwrap();
        let cfg = InversionConfig {
            iterations: 5,
            init: InversionInit::Styles(s0.clone()),
            ..InversionConfig::default()
        };
        let inv = invert(&target, &gen, &cfg).unwrap();
        assert_eq!(inv.mse_curve[0], 0.0);
        assert_eq!(inv.best_mse, 0.0);
        assert!(inv.styles.bit_eq(&s0));
    }

    #[test]
    fn inversion_improves_and_keeps_the_best_iterate() {
        let gen = small_gen(3);
        let target = render(&gen, &styles_for_seed(&gen, 1).unwrap()).unwrap();
        for space in [InversionSpace::Style, InversionSpace::Latent] {
            let cfg = InversionConfig {
                iterations: 40,
                space,
                init: InversionInit::Seed(2),
                lr: 0.05,
                seed: 0,
            };
            let inv = invert(&target, &gen, &cfg).unwrap();
            let run = inv.running_min();
            assert!(run.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(inv.best_mse, *run.last().unwrap());
            assert!(inv.best_mse < inv.mse_curve[0], "{space:?}: {:?}", inv.mse_curve);
            assert!((mse(&inv.image, &target).unwrap() - inv.best_mse).abs() < 1e-12);
        }
        let bad = InversionConfig {
            iterations: 0,
            ..InversionConfig::default()
        };
        assert!(invert(&target, &gen, &bad).is_err());
        assert!(invert(&Tensor::zeros(&[3, 4, 4]), &gen, &InversionConfig::default()).is_err());
    }

    #[test]
    fn heat_maps_partition_unity() {
        let gen = small_gen(3);
        let s = styles_for_seed(&gen, 4).unwrap();
        for layer in 0..gen.num_layers() {
            let h = extract_attention(&gen, &s, layer).unwrap();
            assert!(h.map.row_sum_error().0 < 1e-6);
            let mut total = vec![0.0; 64];
            for m in &h.raw {
                for (t, v) in total.iter_mut().zip(m.data()) {
                    *t += v;
                }
            }
            assert!(total.iter().all(|t| (t - 1.0).abs() < 1e-6));
            for m in &h.normalized {
                let max = m.data().iter().copied().fold(0.0, f64::max);
                assert!((max - 1.0).abs() < 1e-12);
            }
        }
        assert!(extract_attention(&gen, &s, gen.num_layers()).is_err());
    }

    #[test]
    fn single_token_heat_map_is_all_ones() {
        let gen = small_gen(1);
        let s = styles_for_seed(&gen, 0).unwrap();
        let h = extract_attention(&gen, &s, 1).unwrap();
        assert_eq!(h.raw.len(), 1);
        assert!(h.raw[0].data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mean_styles_matches_a_direct_average() {
        let gen = small_gen(2);
        let m = mean_styles(&gen, 3, 10).unwrap();
        let direct: Vec<Tensor> = (10..13).map(|s| styles_for_seed(&gen, s).unwrap().styles).collect();
        let avg = direct[0].add(&direct[1]).unwrap().add(&direct[2]).unwrap().mul_scalar(1.0 / 3.0);
        assert!(m.styles.max_abs_diff(&avg) < 1e-12);
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 50.0).unwrap(), 3.0);
        assert_eq!(percentile(&v, 10.0).unwrap(), 1.4);
        assert!(percentile(&[], 10.0).is_err());
    }

    proptest! {
        #[test]
        fn interpolation_is_affine(seed in any::<u64>(), alpha in -0.5f64..1.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = StyleTokenSet::new(Tensor::randn(&mut rng, &[2, 3, 4], 1.0)).unwrap();
            let b = StyleTokenSet::new(Tensor::randn(&mut rng, &[2, 3, 4], 1.0)).unwrap();
            let lhs = interpolate(&a, &b, alpha).unwrap().styles.add(&interpolate(&a, &b, 1.0 - alpha).unwrap().styles).unwrap();
            let rhs = a.styles.add(&b.styles).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12);
            prop_assert!(interpolate(&a, &a, alpha).unwrap().styles.max_abs_diff(&a.styles) <= 1e-12);
        }

        #[test]
        fn edit_changes_exactly_one_token(seed in any::<u64>(), j in 0usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = StyleTokenSet::new(Tensor::randn(&mut rng, &[1, 5, 3], 1.0)).unwrap();
            let e = edit_style(&s, j, &[10.0, 11.0, 12.0]).unwrap();
            let changed = s.styles.data().iter().zip(e.styles.data()).filter(|(x, y)| x.to_bits() != y.to_bits()).count();
            prop_assert_eq!(changed, 3);
        }
    }
}
