use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tokengan::checks::CheckSizes;
use tokengan::cli::{self, ImageFormat};
use tokengan::latent::InversionSpace;

#[derive(Parser)]
#[command(name = "tokengan", version, about = "Token-based GAN generator at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Png,
    Ppm,
}

impl From<Format> for ImageFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Png => ImageFormat::Png,
            Format::Ppm => ImageFormat::Ppm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    Style,
    Latent,
}

#[derive(Subcommand)]
enum Command {
    /// Train on the procedural toy dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Extra `key=value` config overrides.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        quiet: bool,
    },
    /// Render random samples.
    Sample {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        cols: usize,
        #[arg(long, value_enum, default_value_t = Format::Png)]
        format: Format,
    },
    /// Splice the style tokens of two latents at an inject point.
    Mix {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        seed_a: u64,
        #[arg(long)]
        seed_b: u64,
        #[arg(long)]
        inject: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Png)]
        format: Format,
    },
    /// Linear interpolation strip between two latents' style tokens.
    Interp {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        seed_a: u64,
        #[arg(long)]
        seed_b: u64,
        #[arg(long, default_value_t = 7)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Png)]
        format: Format,
    },
    /// Recover style tokens for a target image.
    Invert {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, value_enum, default_value_t = Space::Style)]
        space: Space,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        mean_samples: usize,
        #[arg(long, value_enum, default_value_t = Format::Png)]
        format: Format,
    },
    /// Per-style-token attention heat maps of one layer.
    Attn {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Png)]
        format: Format,
    },
    /// Finite-difference check of every differentiable operation.
    Gradcheck {
        /// batch,width,tokens,grid
        #[arg(long, value_delimiter = ',', num_args = 4)]
        sizes: Option<Vec<usize>>,
        /// Only run checks whose name contains this text.
        #[arg(long)]
        only: Option<String>,
    },
}

fn run(cmd: Command) -> tokengan::Result<bool> {
    match cmd {
        Command::Train {
            config,
            out,
            steps,
            seed,
            overrides,
            quiet,
        } => {
            let s = cli::cmd_train(&cli::TrainOptions {
                config,
                out,
                steps,
                seed,
                overrides,
                verbose: !quiet,
            })?;
            println!("trained {} steps in {:.1} s", s.steps, s.seconds);
            if let Some(m) = s.last {
                println!("final loss_g {:.4} loss_d {:.4}", m.loss_g, m.loss_d);
            }
            for p in s.checkpoints {
                println!("checkpoint {}", p.display());
            }
        }
        Command::Sample {
            ckpt,
            count,
            seed,
            out,
            cols,
            format,
        } => {
            for p in cli::cmd_sample(&cli::SampleOptions {
                ckpt,
                count,
                seed,
                out,
                cols,
                format: format.into(),
            })? {
                println!("{}", p.display());
            }
        }
        Command::Mix {
            ckpt,
            seed_a,
            seed_b,
            inject,
            out,
            format,
        } => {
            for p in cli::cmd_mix(&cli::MixOptions {
                ckpt,
                seed_a,
                seed_b,
                inject,
                out,
                format: format.into(),
            })? {
                println!("{}", p.display());
            }
        }
        Command::Interp {
            ckpt,
            seed_a,
            seed_b,
            steps,
            out,
            format,
        } => {
            let p = cli::cmd_interp(&cli::InterpOptions {
                ckpt,
                seed_a,
                seed_b,
                steps,
                out,
                format: format.into(),
            })?;
            println!("{}", p.display());
        }
        Command::Invert {
            ckpt,
            image,
            iters,
            out,
            lr,
            space,
            seed,
            mean_samples,
            format,
        } => {
            let r = cli::cmd_invert(&cli::InvertOptions {
                ckpt,
                image,
                iters,
                out,
                lr,
                space: match space {
                    Space::Style => InversionSpace::Style,
                    Space::Latent => InversionSpace::Latent,
                },
                seed,
                mean_samples,
                format: format.into(),
            })?;
            println!(
                "iterations {} initial_mse {:.6} best_mse {:.6} mae {:.3}",
                r.iterations, r.initial_mse, r.best_mse, r.mae
            );
        }
        Command::Attn {
            ckpt,
            seed,
            layer,
            out,
            format,
        } => {
            for p in cli::cmd_attn(&cli::AttnOptions {
                ckpt,
                seed,
                layer,
                out,
                format: format.into(),
            })? {
                println!("{}", p.display());
            }
        }
        Command::Gradcheck { sizes, only } => {
            let sizes = match sizes.as_deref() {
                Some(&[batch, width, tokens, grid]) => CheckSizes {
                    batch,
                    width,
                    tokens,
                    grid,
                },
                _ => CheckSizes::default(),
            };
            let (table, outcomes) = cli::cmd_gradcheck(sizes, only.as_deref())?;
            print!("{table}");
            let failed = outcomes.iter().filter(|o| !o.report.passed()).count();
            println!("{} checks, {failed} failed", outcomes.len());
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let args = Cli::parse();
    match run(args.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("{}", cli::error_line(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
