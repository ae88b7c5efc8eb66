//! Writes a grid of procedural training images and checks the empirical
//! channel statistics against the closed-form values.
//!
//! `cargo run --release --example toy_dataset -- [out_dir]`

use std::path::PathBuf;

use tokengan::image_io::{image_grid, unbatch, write_image};
use tokengan::training::{channel_stats, ToyDatasetSpec};

fn main() -> tokengan::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/examples/toy_dataset".into());
    std::fs::create_dir_all(&out)?;
    let spec = ToyDatasetSpec::default();

    let preview = spec.batch(&(0..64).collect::<Vec<u64>>())?;
    let path = out.join("toy_grid.png");
    write_image(&path, &image_grid(&unbatch(&preview)?, 8)?)?;
    println!("wrote {}", path.display());

    let big = spec.batch(&(0..4096).collect::<Vec<u64>>())?;
    let (mean, std) = spec.analytic_channel_stats();
    println!("analytic   mean {mean:+.4} std {std:.4}");
    for (ch, (m, s)) in channel_stats(&big)?.into_iter().enumerate() {
        println!("channel {ch}  mean {m:+.4} std {s:.4}");
    }
    Ok(())
}
