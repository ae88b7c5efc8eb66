//! Trains a small 16×16 generator on the procedural dataset and compares
//! its per-channel statistics with the analytic targets.
//!
//! `cargo run --release --example train_toy -- [steps] [out_dir]`

use std::path::PathBuf;

use tokengan::cli::{cmd_train, load_models, TrainOptions};
use tokengan::mapping::sample_latents;
use tokengan::tensor::no_grad;
use tokengan::training::channel_stats;

fn main() -> tokengan::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "target/examples/train_toy".into());

    let overrides = [
        "resolutions=4,8,16",
        "widths=32,32,32",
        "patch_sizes=1,1,1",
        "style_dim=32",
        "data_size=16",
        "checkpoint_every=0",
    ];
    let summary = cmd_train(&TrainOptions {
        out: out.clone(),
        steps: Some(steps),
        overrides: overrides.iter().map(|s| s.to_string()).collect(),
        verbose: true,
        ..TrainOptions::default()
    })?;
    println!("{} steps in {:.1} s, metrics in {}", summary.steps, summary.seconds, out.join("metrics.csv").display());

    let (mean, std) = summary.config.data.analytic_channel_stats();
    println!("analytic target: mean {mean:.3} std {std:.3}");
    for ckpt in [summary.checkpoints.first(), summary.checkpoints.last()].into_iter().flatten() {
        let models = load_models(ckpt)?;
        let _g = no_grad();
        let z = sample_latents(1_000_000, 64, models.gen.latent_dim())?;
        let stats = channel_stats(&models.gen.generate(&z)?)?;
        let line: Vec<String> = stats.iter().map(|(m, s)| format!("{m:+.3}/{s:.3}")).collect();
        println!("step {:>5}: {}", models.step, line.join("  "));
    }
    Ok(())
}
