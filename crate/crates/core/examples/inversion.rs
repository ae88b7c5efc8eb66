//! Recovers style tokens for a generated image by gradient descent and
//! reports the reconstruction error against a random-pair baseline.
//!
//! `cargo run --release --example inversion -- <ckpt> [out_dir] [target_seed]`

use std::path::PathBuf;

use tokengan::cli::load_models;
use tokengan::image_io::{image_grid, write_image};
use tokengan::latent::{
    invert, mean_absolute_error, pair_mse_baseline, percentile, render, styles_for_seed, InversionConfig,
};

fn main() -> tokengan::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(ckpt) = args.next() else {
        eprintln!("usage: inversion <ckpt> [out_dir] [target_seed]");
        std::process::exit(2);
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "target/examples/inversion".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(9_000_000);
    std::fs::create_dir_all(&out)?;
    let gen = load_models(ckpt.as_ref())?.gen;

    let target = render(&gen, &styles_for_seed(&gen, seed)?)?;
    let inv = invert(&target, &gen, &InversionConfig::default())?;
    for (i, v) in inv.running_min().iter().enumerate().step_by(50) {
        println!("iter {i:>4}  best mse {v:.5}");
    }
    let p10 = percentile(&pair_mse_baseline(&gen, 100, 5_000_000)?, 10.0)?;
    println!(
        "best mse {:.5} (random-pair p10 {p10:.5}), mean abs error {:.2} levels",
        inv.best_mse,
        mean_absolute_error(&inv.image, &target)?
    );
    let path = out.join("inversion.png");
    write_image(&path, &image_grid(&[target, inv.image], 2)?)?;
    println!("target | recovered: {}", path.display());
    Ok(())
}
