//! Per-style-token attention heat maps for every layer of one sample.
//! Each output row is the sample followed by one grey map per token.
//!
//! `cargo run --release --example attention_maps -- <ckpt> [out_dir] [seed]`

use std::path::PathBuf;

use tokengan::cli::load_models;
use tokengan::image_io::{image_grid, write_image};
use tokengan::latent::{extract_attention, render, styles_for_seed};
use tokengan::Tensor;

fn main() -> tokengan::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(ckpt) = args.next() else {
        eprintln!("usage: attention_maps <ckpt> [out_dir] [seed]");
        std::process::exit(2);
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "target/examples/attention".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    std::fs::create_dir_all(&out)?;
    let gen = load_models(ckpt.as_ref())?.gen;

    let styles = styles_for_seed(&gen, seed)?;
    let sample = render(&gen, &styles)?;
    let mut panels = Vec::new();
    for layer in 0..gen.num_layers() {
        let maps = extract_attention(&gen, &styles, layer)?;
        let dominant: Vec<f64> = maps.raw.iter().map(|m| m.data().iter().sum::<f64>() / m.numel() as f64).collect();
        println!("layer {layer}: grid {}×{}, mean share per token {:.2?}", maps.map.grid_h, maps.map.grid_w, dominant);
        panels.push(sample.clone());
        for h in &maps.normalized {
            let r = h.shape()[0];
            let grey = h.mul_scalar(2.0).add_scalar(-1.0).reshape(&[1, r, r])?;
            panels.push(Tensor::concat(&[grey.clone(), grey.clone(), grey], 0)?);
        }
    }
    let path = out.join("attention.png");
    write_image(&path, &image_grid(&panels, styles.n() + 1)?)?;
    println!("{}", path.display());
    Ok(())
}
