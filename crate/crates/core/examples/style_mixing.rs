//! Style-token mixing: for every inject point t, tokens `[0, t)` come from
//! one latent and the rest from another. Writes one row per t.
//!
//! `cargo run --release --example style_mixing -- <ckpt> [out_dir]`

use std::path::PathBuf;

use tokengan::cli::load_models;
use tokengan::image_io::{image_grid, write_image};
use tokengan::latent::{render, styles_for_seed};
use tokengan::training::mix_styles;

fn main() -> tokengan::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(ckpt) = args.next() else {
        eprintln!("usage: style_mixing <ckpt> [out_dir]");
        std::process::exit(2);
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "target/examples/style_mixing".into());
    std::fs::create_dir_all(&out)?;
    let gen = load_models(ckpt.as_ref())?.gen;

    let a = styles_for_seed(&gen, 1)?;
    let b = styles_for_seed(&gen, 2)?;
    let n = a.n();
    let panels = (0..=n)
        .map(|t| render(&gen, &mix_styles(&a, &b, t)?))
        .collect::<tokengan::Result<Vec<_>>>()?;
    let path = out.join("mixing.png");
    write_image(&path, &image_grid(&panels, n + 1)?)?;
    println!("t = 0..={n} left to right (t = 0 is latent b, t = {n} is latent a): {}", path.display());
    Ok(())
}
