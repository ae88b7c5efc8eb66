//! Renders a grid of samples from a checkpoint.
//!
//! `cargo run --release --example sample_images -- <ckpt> [out_dir] [count]`

use std::path::PathBuf;

use tokengan::cli::{cmd_sample, ImageFormat, SampleOptions};

fn main() -> tokengan::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(ckpt) = args.next() else {
        eprintln!("usage: sample_images <ckpt> [out_dir] [count]");
        std::process::exit(2);
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "target/examples/samples".into());
    let count = args.next().and_then(|s| s.parse().ok()).unwrap_or(16);
    let files = cmd_sample(&SampleOptions {
        ckpt: ckpt.into(),
        count,
        seed: 0,
        out,
        cols: 0,
        format: ImageFormat::Png,
    })?;
    println!("grid: {}", files.last().expect("grid path").display());
    Ok(())
}
