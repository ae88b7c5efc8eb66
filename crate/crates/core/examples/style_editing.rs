//! Replaces one style token at a time with the matching token of another
//! latent. Shows which image regions each token controls.
//!
//! `cargo run --release --example style_editing -- <ckpt> [out_dir]`

use std::path::PathBuf;

use tokengan::cli::load_models;
use tokengan::image_io::{image_grid, write_image};
use tokengan::latent::{edit_style, mse, render, styles_for_seed};

fn main() -> tokengan::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(ckpt) = args.next() else {
        eprintln!("usage: style_editing <ckpt> [out_dir]");
        std::process::exit(2);
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| "target/examples/style_editing".into());
    std::fs::create_dir_all(&out)?;
    let gen = load_models(ckpt.as_ref())?.gen;

    let base = styles_for_seed(&gen, 3)?;
    let donor = styles_for_seed(&gen, 4)?;
    let original = render(&gen, &base)?;
    let mut panels = vec![original.clone()];
    for j in 0..base.n() {
        let edited = edit_style(&base, j, &donor.token(0, j)?)?;
        let img = render(&gen, &edited)?;
        println!("token {j}: image mse vs original {:.5}", mse(&img, &original)?);
        panels.push(img);
    }
    let path = out.join("editing.png");
    write_image(&path, &image_grid(&panels, panels.len())?)?;
    println!("{}", path.display());
    Ok(())
}
