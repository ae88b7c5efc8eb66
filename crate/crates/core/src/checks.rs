//! Registry of finite-difference gradient checks covering every
//! differentiable operation and the composed networks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::discriminator::{DiscConfig, Discriminator};
use crate::error::Result;
use crate::generator::{Generator, GeneratorConfig};
use crate::mapping::{MappingConfig, MappingNetwork};
use crate::nn::Parameterized;
use crate::style_block::{attend, modulate, normalize, NormKind, StyleBlock};
use crate::synthesis::SynthesisConfig;
use crate::tensor::gradcheck::{check_gradients, project_to_scalar, GradCheckReport, FD_STEP, FD_TOLERANCE};
use crate::tensor::{grad, MatTranspose, Tensor};
use crate::tokens::tokens_to_image;
use crate::training::{discriminator_loss, generator_loss, r1_from_scores};

/// Problem sizes of the gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSizes {
    pub batch: usize,
    /// Token width d.
    pub width: usize,
    /// Style tokens n.
    pub tokens: usize,
    /// Side of square token grids and spatial maps.
    pub grid: usize,
}

impl Default for CheckSizes {
    fn default() -> Self {
        CheckSizes {
            batch: 2,
            width: 4,
            tokens: 3,
            grid: 4,
        }
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub report: GradCheckReport,
}

type CheckFn = Box<dyn Fn(&[Tensor]) -> Result<Tensor>>;

struct Case {
    name: String,
    f: CheckFn,
    inputs: Vec<Tensor>,
}

/// Values whose magnitude stays at least 0.1, keeping kinked functions
/// away from their kink.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let t = Tensor::randn(rng, shape, 1.0);
    let v = t.data().iter().map(|&x| x + 0.1f64.copysign(x)).collect();
    Tensor::from_vec(v, shape).expect("shape from a tensor")
}

fn positive(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let t = Tensor::randn(rng, shape, 1.0);
    let v = t.data().iter().map(|&x| 0.5 + x.abs()).collect();
    Tensor::from_vec(v, shape).expect("shape from a tensor")
}

fn case(name: &str, inputs: Vec<Tensor>, f: impl Fn(&[Tensor]) -> Result<Tensor> + 'static) -> Case {
    let seed = name.bytes().fold(0u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64));
    Case {
        name: name.to_string(),
        f: Box::new(move |x| {
            let out = f(x)?;
            if out.numel() == 1 && out.rank() == 0 {
                Ok(out)
            } else {
                project_to_scalar(&out, seed)
            }
        }),
        inputs,
    }
}

/// Small generator with resolutions 4 → 8, used by the composed checks.
pub fn small_generator_config(sizes: CheckSizes) -> GeneratorConfig {
    // 2×2 patches at 8² keep m = 16 on both resolutions
    let mut s = SynthesisConfig::uniform(vec![4, 8], sizes.width, 1, sizes.tokens);
    s.patch_sizes = vec![1, 2];
    s.blocks_per_resolution = 1;
    GeneratorConfig {
        synthesis: s,
        mapping_depth: 2,
    }
}

fn cases(sizes: CheckSizes) -> Result<Vec<Case>> {
    let CheckSizes {
        batch: b,
        width: d,
        tokens: n,
        grid: g,
    } = sizes;
    let m = g * g;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = &mut rng;
    let a = Tensor::randn(r, &[b, d], 1.0);
    let a2 = Tensor::randn(r, &[b, d], 1.0);
    let row = Tensor::randn(r, &[d], 1.0);
    let col = Tensor::randn(r, &[b, 1], 1.0);
    let pos = positive(r, &[b, d]);
    let kinked = away_from_zero(r, &[b, d]);
    let sq = Tensor::randn(r, &[d, d], 1.0);
    let sq_t = Tensor::randn(r, &[n, d], 1.0);
    let batched = Tensor::randn(r, &[b, m, d], 1.0);
    let keys = Tensor::randn(r, &[n, d], 1.0);
    let styles = Tensor::randn(r, &[b, n, d], 1.0);
    let spatial = Tensor::randn(r, &[b, g, g, d], 1.0);
    let big = Tensor::randn(r, &[b, 2 * g, 2 * g, d], 1.0);
    let cols = Tensor::randn(r, &[b * m, 9 * d], 1.0);
    let bias = Tensor::randn(r, &[n], 1.0);
    let c = 3;
    let p = 2;
    let patch_tokens = Tensor::randn(r, &[b, m, p * p * c], 1.0);

    let mut v = vec![
        case("add", vec![a.clone(), row.clone()], |x| x[0].add(&x[1])),
        case("sub", vec![a.clone(), col.clone()], |x| x[0].sub(&x[1])),
        case("mul", vec![a.clone(), a2.clone()], |x| x[0].mul(&x[1])),
        case("div", vec![a.clone(), pos.clone()], |x| x[0].div(&x[1])),
        case("add_scalar", vec![a.clone()], |x| Ok(x[0].add_scalar(0.7))),
        case("mul_scalar", vec![a.clone()], |x| Ok(x[0].mul_scalar(-1.3))),
        case("neg", vec![a.clone()], |x| Ok(x[0].neg())),
        case("exp", vec![a.clone()], |x| Ok(x[0].exp())),
        case("ln", vec![pos.clone()], |x| Ok(x[0].ln())),
        case("sqrt", vec![pos.clone()], |x| Ok(x[0].sqrt())),
        case("square", vec![a.clone()], |x| x[0].square()),
        case("sigmoid", vec![a.clone()], |x| Ok(x[0].sigmoid())),
        case("softplus", vec![a.clone()], |x| Ok(x[0].softplus())),
        case("leaky_relu", vec![kinked], |x| Ok(x[0].leaky_relu(0.2))),
        case("sum_to", vec![batched.clone()], move |x| x[0].sum_to(&[1, d])),
        case("broadcast_to", vec![row.clone()], move |x| x[0].broadcast_to(&[b, 2, d])),
        case("sum_all", vec![a.clone()], |x| Ok(x[0].sum_all())),
        case("mean_all", vec![a.clone()], |x| Ok(x[0].mean_all())),
        case("sum_axis", vec![batched.clone()], |x| x[0].sum_axis(1, false)),
        case("mean_axis", vec![batched.clone()], |x| x[0].mean_axis(2, true)),
        case("var_axis", vec![batched.clone()], |x| x[0].var_axis(1, true)),
        case("reshape", vec![batched.clone()], move |x| x[0].reshape(&[b * m, d])),
        case("permute", vec![batched.clone()], |x| x[0].permute(&[2, 0, 1])),
        case("transpose", vec![sq.clone()], |x| x[0].transpose()),
        case("matmul", vec![a.clone(), sq.clone()], |x| x[0].matmul(&x[1])),
        case("mm_transposed", vec![sq_t.clone(), a.clone()], |x| {
            x[0].mm(&x[1], MatTranspose::No, MatTranspose::Yes)
        }),
        case("mm_batched", vec![batched.clone(), styles.clone()], |x| {
            x[0].mm(&x[1], MatTranspose::No, MatTranspose::Yes)
        }),
        case("linear", vec![a.clone(), sq_t.clone(), bias], |x| x[0].linear(&x[1], Some(&x[2]))),
        case("softmax_rows", vec![batched.clone()], |x| x[0].softmax_rows()),
        case("layer_norm", vec![batched.clone()], |x| x[0].layer_norm(1e-8)),
        case("pixel_norm", vec![batched.clone()], |x| x[0].pixel_norm(1e-8)),
        case("narrow", vec![batched.clone()], move |x| x[0].narrow(1, 1, m - 1)),
        case("pad_axis", vec![a.clone()], move |x| x[0].pad_axis(1, 1, d + 3)),
        case("concat", vec![a.clone(), col], |x| Tensor::concat(&[x[0].clone(), x[1].clone()], 1)),
        case("upsample_nearest2x", vec![spatial.clone()], |x| x[0].upsample_nearest2x()),
        case("upsample_bilinear2x", vec![spatial.clone()], |x| x[0].upsample_bilinear2x()),
        case("bilinear2x_adjoint", vec![big.clone()], |x| x[0].bilinear2x_adjoint()),
        case("sum_pool2x", vec![big.clone()], |x| x[0].sum_pool2x()),
        case("avg_pool2x", vec![big], |x| x[0].avg_pool2x()),
        case("im2col3x3", vec![spatial.clone()], |x| x[0].im2col3x3()),
        case("col2im3x3", vec![cols], move |x| x[0].col2im3x3(b, g, g, d)),
        case("tokens_to_image", vec![patch_tokens], move |x| tokens_to_image(&x[0], g, g, p, c)),
    ];

    for kind in NormKind::ALL {
        v.push(case(&format!("normalize_{}", kind.as_str()), vec![batched.clone()], move |x| {
            normalize(&x[0], kind)
        }));
    }
    v.push(case("modulate", vec![batched.clone(), batched.clone()], |x| modulate(&x[0], &x[1])));
    for heads in [1, 2] {
        v.push(case(
            &format!("attend_{heads}head"),
            vec![batched.clone(), keys.clone(), styles.clone()],
            move |x| attend(&x[0], &x[1], &x[2], heads).map(|(s, _)| s),
        ));
    }

    let block = StyleBlock::init(r, d, n, d, NormKind::LayerNorm, 1)?;
    v.push(case("style_block", vec![batched.clone(), styles.clone()], move |x| {
        block.forward(&x[0], &x[1]).map(|(o, _)| o)
    }));

    let mapping = MappingNetwork::init(
        r,
        MappingConfig {
            dim: d,
            depth: 2,
            n_styles: n,
            sets: 1,
        },
    )?;
    v.push(case("mapping_network", vec![a.clone()], move |x| mapping.forward(&x[0])));

    let cfg = small_generator_config(sizes);
    let gen = Generator::init(r, &cfg)?;
    let gen2 = gen.clone();
    v.push(case("generator_latent", vec![a.clone()], move |x| gen.generate(&x[0])));
    v.push(case("synthesis_styles", vec![styles.clone()], move |x| {
        gen2.synthesis.forward(&x[0]).map(|s| s.image)
    }));
    // generator parameters, one tensor of each kind
    let gen3 = Generator::init(r, &cfg)?;
    let names: Vec<String> = gen3.params().into_iter().map(|(k, _)| k).collect();
    let z = Tensor::randn(r, &[b, d], 1.0);
    let kinds = ["mapping.trunk.0.w", "mapping.head.0.w", "base.tokens", "base.pos", ".keys", ".qw", ".ew", "torgb.w"];
    let picked = kinds.iter().filter_map(|k| names.iter().find(|n| n.ends_with(k)));
    for name in picked
    {
        let current = gen3
            .params()
            .into_iter()
            .find(|(k, _)| k == name)
            .map(|(_, t)| t.clone())
            .expect("listed name");
        let (g3, key, zz) = (gen3.clone(), name.clone(), z.clone());
        v.push(case(&format!("generator_param:{name}"), vec![current], move |x| {
            let mut model = g3.clone();
            for (k, slot) in model.params_mut() {
                if k == key {
                    *slot = x[0].clone();
                }
            }
            model.generate(&zz)
        }));
    }

    let disc = Discriminator::init(
        r,
        DiscConfig {
            resolution: 8,
            channels: c,
            width: d,
        },
    )?;
    let img = Tensor::randn(r, &[b, c, 8, 8], 1.0);
    let d1 = disc.clone();
    v.push(case("discriminator", vec![img.clone()], move |x| d1.forward(&x[0])));
    let conv_w = disc.convs[0].weight.clone();
    let d3 = disc.clone();
    let real = img.detach().requires_grad_(true);
    v.push(case("r1_conv_weight", vec![conv_w], move |x| {
        let mut model = d3.clone();
        model.convs[0].weight = x[0].clone();
        let real = real.detach().requires_grad_(true);
        let scores = model.forward(&real)?;
        r1_from_scores(&real, &scores, 1.0)
    }));
    let scores = Tensor::randn(r, &[b], 1.0);
    let scores2 = Tensor::randn(r, &[b], 1.0);
    v.push(case("generator_loss", vec![scores.clone()], |x| Ok(generator_loss(&x[0]))));
    v.push(case("discriminator_loss", vec![scores, scores2], |x| discriminator_loss(&x[0], &x[1])));
    v.push(case("second_order", vec![a], |x| {
        let x = [if x[0].requires_grad() {
            x[0].clone()
        } else {
            x[0].detach().requires_grad_(true)
        }];
        let inner = x[0].square()?.mul(&x[0].sigmoid())?.sum_all();
        let g = grad(&inner, &[&x[0]], true)?;
        Ok(g[0].square()?.sum_all())
    }));
    Ok(v)
}

/// Names of all registered checks.
pub fn check_names(sizes: CheckSizes) -> Result<Vec<String>> {
    Ok(cases(sizes)?.into_iter().map(|c| c.name).collect())
}

/// Runs every check whose name contains `filter` (all when `None`).
pub fn run_checks(sizes: CheckSizes, filter: Option<&str>) -> Result<Vec<CheckOutcome>> {
    cases(sizes)?
        .into_iter()
        .filter(|c| filter.is_none_or(|f| c.name.contains(f)))
        .map(|c| {
            let report = check_gradients(&c.f, &c.inputs, FD_STEP, FD_TOLERANCE)?;
            Ok(CheckOutcome { name: c.name, report })
        })
        .collect()
}

/// Fixed-width pass/fail table.
pub fn render_table(outcomes: &[CheckOutcome]) -> String {
    let mut out = format!("{:<44} {:>8} {:>12} {:>12}  result\n", "check", "entries", "max rel err", "max abs err");
    for o in outcomes {
        out.push_str(&format!(
            "{:<44} {:>8} {:>12.3e} {:>12.3e}  {}\n",
            o.name,
            o.report.checked,
            o.report.max_rel_error,
            o.report.max_abs_error,
            if o.report.passed() { "pass" } else { "FAIL" }
        ));
    }
    out
}
