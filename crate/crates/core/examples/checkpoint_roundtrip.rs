//! Saves freshly initialized networks, reloads them and confirms every
//! parameter and the rendered output survive bit for bit.
//!
//! `cargo run --release --example checkpoint_roundtrip -- [path]`

use std::path::PathBuf;

use tokengan::cli::{load_models, save_models};
use tokengan::config::RunConfig;
use tokengan::latent::{render, styles_for_seed};
use tokengan::nn::Parameterized;

fn main() -> tokengan::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| "target/examples/roundtrip.tkgn".into());
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let cfg = RunConfig::default();
    let (gen, disc) = cfg.build_models()?;
    save_models(&path, &cfg, &gen, &disc, 0)?;
    let back = load_models(&path)?;

    let mut count = 0;
    let mut values = 0;
    for ((na, a), (nb, b)) in gen.params().into_iter().chain(disc.params()).zip(back.gen.params().into_iter().chain(back.disc.params())) {
        assert_eq!(na, nb);
        assert!(a.bit_eq(b), "{na} changed");
        count += 1;
        values += a.numel();
    }
    let same = render(&gen, &styles_for_seed(&gen, 5)?)?.bit_eq(&render(&back.gen, &styles_for_seed(&back.gen, 5)?)?);
    assert!(same, "rendered sample changed");
    let bytes = std::fs::metadata(&path)?.len();
    println!("{count} tensors, {values} values, {bytes} bytes: bit-exact round trip via {}", path.display());
    Ok(())
}
