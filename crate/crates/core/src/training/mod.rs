//! Adversarial training: losses, lazy R1, style mixing, Adam and the toy
//! dataset the desk-scale runs learn from.

mod adam;
mod losses;
mod mixing;
mod toy;
mod trainer;

pub use adam::{Adam, AdamConfig};
pub use losses::{discriminator_loss, generator_loss, r1_from_scores, r1_penalty, r1_weight};
pub use mixing::{mix_layers, mix_styles};
pub use toy::{channel_stats, hsv_to_rgb, ToyDatasetSpec, ToyFactors};
pub use trainer::{StepMetrics, TrainConfig, Trainer};
