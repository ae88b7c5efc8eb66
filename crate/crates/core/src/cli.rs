//! Command implementations behind the `tokengan` binary.
//!
//! Every command is a plain function from options to files on disk plus a
//! small summary value, so the binary stays a thin argument parser and the
//! commands can be driven from tests.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::checkpoint::Checkpoint;
use crate::checks::{render_table, run_checks, CheckOutcome, CheckSizes};
use crate::config::RunConfig;
use crate::discriminator::Discriminator;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::image_io::{image_grid, read_image, write_image};
use crate::latent::{
    extract_attention, interpolate, invert, mean_absolute_error, render, styles_for_seed, InversionConfig,
    InversionInit, InversionSpace,
};
use crate::nn::Parameterized;
use crate::tensor::Tensor;
use crate::tokens::StyleTokenSet;
use crate::training::{mix_styles, StepMetrics, Trainer};

/// Name of the scalar tensor holding the training step in a checkpoint.
pub const STEP_TENSOR: &str = "train.step";

/// Image file extension used by the commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImageFormat {
    #[default]
    Png,
    Ppm,
}

impl ImageFormat {
    pub fn ext(self) -> &'static str {
        match self {
            ImageFormat::Png => "png",
            ImageFormat::Ppm => "ppm",
        }
    }
}

impl std::str::FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "png" => Ok(ImageFormat::Png),
            "ppm" => Ok(ImageFormat::Ppm),
            _ => Err(Error::Config(format!("unknown image format {s:?} (png or ppm)"))),
        }
    }
}

/// Writes a checkpoint of both networks at `step`.
pub fn save_models(path: &Path, cfg: &RunConfig, gen: &Generator, disc: &Discriminator, step: u64) -> Result<()> {
    let mut ck = Checkpoint::new(cfg.render());
    ck.push(STEP_TENSOR, &Tensor::scalar(step as f64));
    for (name, t) in gen.params().into_iter().chain(disc.params()) {
        ck.push(name, t);
    }
    ck.save(path)
}

/// A checkpoint restored into live networks.
pub struct LoadedModels {
    pub config: RunConfig,
    pub gen: Generator,
    pub disc: Discriminator,
    pub step: u64,
}

pub fn load_models(path: &Path) -> Result<LoadedModels> {
    let ck = Checkpoint::load(path)?;
    let config = RunConfig::parse(&ck.header)?;
    let (mut gen, mut disc) = config.build_models()?;
    let lookup = |name: &str| ck.get(name).cloned();
    gen.load_params(&lookup)?;
    disc.load_params(&lookup)?;
    let step = ck.get(STEP_TENSOR).map(|t| t.data()[0] as u64).unwrap_or(0);
    Ok(LoadedModels { config, gen, disc, step })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("ckpt_{step:06}.tkgn"))
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub steps: Option<u64>,
    pub seed: Option<u64>,
    /// `key=value` overrides applied after the config file.
    pub overrides: Vec<String>,
    /// Print one line per step to stderr.
    pub verbose: bool,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub config: RunConfig,
    pub steps: u64,
    pub last: Option<StepMetrics>,
    pub checkpoints: Vec<PathBuf>,
    pub seconds: f64,
}

/// Resolves the run configuration of a training command.
pub fn train_config(opts: &TrainOptions) -> Result<RunConfig> {
    let mut cfg = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &opts.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {kv:?} is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = opts.steps {
        cfg.train.total_steps = s;
    }
    if let Some(s) = opts.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Trains from scratch. Writes `config.txt`, `metrics.csv` (deterministic),
/// `timing.csv` (wall clock) and checkpoints `ckpt_NNNNNN.tkgn` at step 0,
/// every `checkpoint_every` steps and at the end.
pub fn cmd_train(opts: &TrainOptions) -> Result<TrainSummary> {
    let cfg = train_config(opts)?;
    ensure_dir(&opts.out)?;
    fs::write(opts.out.join("config.txt"), cfg.render())?;
    let (gen, disc) = cfg.build_models()?;
    let mut trainer = Trainer::new(cfg.train.clone(), cfg.data.clone(), gen, disc)?;

    let mut metrics = BufWriter::new(File::create(opts.out.join("metrics.csv"))?);
    let mut timing = BufWriter::new(File::create(opts.out.join("timing.csv"))?);
    writeln!(metrics, "{}", StepMetrics::CSV_HEADER)?;
    writeln!(timing, "step,wall_ms")?;

    let mut checkpoints = Vec::new();
    let mut save = |trainer: &Trainer, step: u64| -> Result<()> {
        let p = checkpoint_path(&opts.out, step);
        save_models(&p, &cfg, &trainer.gen, &trainer.disc, step)?;
        checkpoints.push(p);
        Ok(())
    };
    save(&trainer, 0)?;
    let start = Instant::now();
    let mut last = None;
    for _ in 0..cfg.train.total_steps {
        let t0 = Instant::now();
        let m = trainer.train_step()?;
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        writeln!(metrics, "{}", m.csv_row())?;
        writeln!(timing, "{},{ms:.1}", m.step)?;
        metrics.flush()?;
        timing.flush()?;
        if opts.verbose {
            eprintln!("step {} loss_g {:.4} loss_d {:.4} r1 {:.4} ({ms:.0} ms)", m.step, m.loss_g, m.loss_d, m.r1);
        }
        let done = trainer.step();
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.train.total_steps {
            save(&trainer, done)?;
        }
        last = Some(m);
    }
    if cfg.train.total_steps > 0 {
        save(&trainer, trainer.step())?;
    }
    Ok(TrainSummary {
        steps: trainer.step(),
        config: cfg,
        last,
        checkpoints,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct SampleOptions {
    pub ckpt: PathBuf,
    pub count: usize,
    pub seed: u64,
    pub out: PathBuf,
    /// Grid columns; 0 picks a near-square layout.
    pub cols: usize,
    pub format: ImageFormat,
}

fn grid_cols(cols: usize, count: usize) -> usize {
    if cols > 0 {
        cols
    } else {
        (count as f64).sqrt().ceil().max(1.0) as usize
    }
}

/// Renders latents `seed..seed + count` one at a time. Writes
/// `sample_<seed>.<ext>` per image and `samples.<ext>` as a grid.
pub fn cmd_sample(opts: &SampleOptions) -> Result<Vec<PathBuf>> {
    if opts.count == 0 {
        return Err(Error::Config("--count must be at least 1".into()));
    }
    let models = load_models(&opts.ckpt)?;
    ensure_dir(&opts.out)?;
    let ext = opts.format.ext();
    let mut images = Vec::with_capacity(opts.count);
    let mut files = Vec::with_capacity(opts.count + 1);
    for i in 0..opts.count as u64 {
        let seed = opts.seed + i;
        let img = render(&models.gen, &styles_for_seed(&models.gen, seed)?)?;
        let p = opts.out.join(format!("sample_{seed}.{ext}"));
        write_image(&p, &img)?;
        files.push(p);
        images.push(img);
    }
    let grid = opts.out.join(format!("samples.{ext}"));
    write_image(&grid, &image_grid(&images, grid_cols(opts.cols, opts.count))?)?;
    files.push(grid);
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct MixOptions {
    pub ckpt: PathBuf,
    pub seed_a: u64,
    pub seed_b: u64,
    pub inject: usize,
    pub out: PathBuf,
    pub format: ImageFormat,
}

/// Tokens `[0, inject)` from seed a and the rest from seed b. Writes
/// `mix.<ext>` and the strip `mix_strip.<ext>` (a, mixed, b).
pub fn cmd_mix(opts: &MixOptions) -> Result<Vec<PathBuf>> {
    let models = load_models(&opts.ckpt)?;
    ensure_dir(&opts.out)?;
    let gen = &models.gen;
    let a = styles_for_seed(gen, opts.seed_a)?;
    let b = styles_for_seed(gen, opts.seed_b)?;
    let mixed = mix_styles(&a, &b, opts.inject)?;
    let images = [render(gen, &a)?, render(gen, &mixed)?, render(gen, &b)?];
    let ext = opts.format.ext();
    let single = opts.out.join(format!("mix.{ext}"));
    let strip = opts.out.join(format!("mix_strip.{ext}"));
    write_image(&single, &images[1])?;
    write_image(&strip, &image_grid(&images, 3)?)?;
    Ok(vec![single, strip])
}

#[derive(Debug, Clone)]
pub struct InterpOptions {
    pub ckpt: PathBuf,
    pub seed_a: u64,
    pub seed_b: u64,
    pub steps: usize,
    pub out: PathBuf,
    pub format: ImageFormat,
}

/// `steps` panels with α running from 1 (seed a) to 0 (seed b), written as
/// the strip `interp.<ext>`.
pub fn cmd_interp(opts: &InterpOptions) -> Result<PathBuf> {
    if opts.steps < 2 {
        return Err(Error::Config("--steps must be at least 2".into()));
    }
    let models = load_models(&opts.ckpt)?;
    ensure_dir(&opts.out)?;
    let gen = &models.gen;
    let a = styles_for_seed(gen, opts.seed_a)?;
    let b = styles_for_seed(gen, opts.seed_b)?;
    let panels = interpolation_panels(gen, &a, &b, opts.steps)?;
    let p = opts.out.join(format!("interp.{}", opts.format.ext()));
    write_image(&p, &image_grid(&panels, opts.steps)?)?;
    Ok(p)
}

/// Renderings at α = 1, …, 0 in `steps` even increments.
pub fn interpolation_panels(gen: &Generator, a: &StyleTokenSet, b: &StyleTokenSet, steps: usize) -> Result<Vec<Tensor>> {
    (0..steps)
        .map(|k| {
            let alpha = 1.0 - k as f64 / (steps - 1) as f64;
            render(gen, &interpolate(a, b, alpha)?)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct InvertOptions {
    pub ckpt: PathBuf,
    pub image: PathBuf,
    pub iters: usize,
    pub out: PathBuf,
    pub lr: f64,
    pub space: InversionSpace,
    pub seed: u64,
    /// Mapped latents averaged for the starting point.
    pub mean_samples: usize,
    pub format: ImageFormat,
}

#[derive(Debug, Clone)]
pub struct InvertReport {
    pub initial_mse: f64,
    pub best_mse: f64,
    pub mae: f64,
    pub iterations: usize,
}

/// Inverts a target image. Writes `recovered.<ext>`, `compare.<ext>`
/// (target beside recovery), `styles.tkgn` and `mse.csv`.
pub fn cmd_invert(opts: &InvertOptions) -> Result<InvertReport> {
    let models = load_models(&opts.ckpt)?;
    ensure_dir(&opts.out)?;
    let target = read_image(&opts.image)?;
    let cfg = InversionConfig {
        iterations: opts.iters,
        lr: opts.lr,
        space: opts.space,
        init: InversionInit::MeanStyle(opts.mean_samples),
        seed: opts.seed,
    };
    let inv = invert(&target, &models.gen, &cfg)?;
    let ext = opts.format.ext();
    write_image(&opts.out.join(format!("recovered.{ext}")), &inv.image)?;
    write_image(
        &opts.out.join(format!("compare.{ext}")),
        &image_grid(&[target.clone(), inv.image.clone()], 2)?,
    )?;
    let mut ck = Checkpoint::new(models.config.render());
    ck.push("styles", &inv.styles.styles);
    if let Some(z) = &inv.latent {
        ck.push("latent", z);
    }
    ck.save(&opts.out.join("styles.tkgn"))?;
    let mut csv = BufWriter::new(File::create(opts.out.join("mse.csv"))?);
    writeln!(csv, "iteration,mse")?;
    for (i, v) in inv.mse_curve.iter().enumerate() {
        writeln!(csv, "{i},{v}")?;
    }
    csv.flush()?;
    Ok(InvertReport {
        initial_mse: inv.mse_curve[0],
        best_mse: inv.best_mse,
        mae: mean_absolute_error(&inv.image, &target)?,
        iterations: inv.mse_curve.len(),
    })
}

#[derive(Debug, Clone)]
pub struct AttnOptions {
    pub ckpt: PathBuf,
    pub seed: u64,
    pub layer: usize,
    pub out: PathBuf,
    pub format: ImageFormat,
}

/// Heat maps of every style token at one layer. Writes
/// `attn_layer<L>.<ext>` (the sample followed by one grey map per token)
/// and `attn_layer<L>.csv` with the raw `[m, n]` weights.
pub fn cmd_attn(opts: &AttnOptions) -> Result<Vec<PathBuf>> {
    let models = load_models(&opts.ckpt)?;
    ensure_dir(&opts.out)?;
    let gen = &models.gen;
    let styles = styles_for_seed(gen, opts.seed)?;
    let maps = extract_attention(gen, &styles, opts.layer)?;
    let mut panels = vec![render(gen, &styles)?];
    for h in &maps.normalized {
        let r = h.shape()[0];
        let grey = h.mul_scalar(2.0).add_scalar(-1.0).reshape(&[1, r, r])?;
        panels.push(Tensor::concat(&[grey.clone(), grey.clone(), grey], 0)?);
    }
    let img = opts.out.join(format!("attn_layer{}.{}", opts.layer, opts.format.ext()));
    write_image(&img, &image_grid(&panels, panels.len())?)?;
    let csv_path = opts.out.join(format!("attn_layer{}.csv", opts.layer));
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    let n = maps.map.n();
    let header: Vec<String> = (0..n).map(|j| format!("token{j}")).collect();
    writeln!(csv, "{}", header.join(","))?;
    for row in maps.map.weights.data().chunks(n) {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(csv, "{}", cells.join(","))?;
    }
    csv.flush()?;
    Ok(vec![img, csv_path])
}

/// Runs the gradient-check registry. Returns the table text and outcomes.
pub fn cmd_gradcheck(sizes: CheckSizes, filter: Option<&str>) -> Result<(String, Vec<CheckOutcome>)> {
    if sizes.batch == 0 || sizes.width < 2 || sizes.tokens == 0 || sizes.grid < 2 {
        return Err(Error::Config(format!("gradient-check sizes too small: {sizes:?}")));
    }
    let outcomes = run_checks(sizes, filter)?;
    if outcomes.is_empty() {
        return Err(Error::Config(format!("no gradient check matches {filter:?}")));
    }
    Ok((render_table(&outcomes), outcomes))
}

/// Single-line, machine-parsable error text.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!("error code={} kind={} message={msg}", e.exit_code(), e.kind())
}
