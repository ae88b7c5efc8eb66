//! Linear interpolation in style-token space between several seed pairs.
//!
//! `cargo run --release --example interpolation -- <ckpt> [out_dir] [steps]`

use std::path::PathBuf;

use tokengan::cli::{interpolation_panels, load_models};
use tokengan::image_io::{image_grid, write_image};
use tokengan::latent::styles_for_seed;

fn main() -> tokengan::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(ckpt) = args.next() else {
        eprintln!("usage: interpolation <ckpt> [out_dir] [steps]");
        std::process::exit(2);
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "target/examples/interpolation".into());
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    std::fs::create_dir_all(&out)?;
    let gen = load_models(ckpt.as_ref())?.gen;

    let mut rows = Vec::new();
    for pair in 0..4u64 {
        let a = styles_for_seed(&gen, 2 * pair)?;
        let b = styles_for_seed(&gen, 2 * pair + 1)?;
        rows.extend(interpolation_panels(&gen, &a, &b, steps)?);
    }
    let path = out.join("interpolation.png");
    write_image(&path, &image_grid(&rows, steps)?)?;
    println!("4 pairs × {steps} steps: {}", path.display());
    Ok(())
}
