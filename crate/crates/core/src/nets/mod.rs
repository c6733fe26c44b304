//! Encoder, generator and discriminator networks, their loss terms, and the
//! checkpoint format.

mod arch;
pub mod checkpoint;
pub mod losses;
mod model;

pub use arch::{ArchConfig, ModelKind};
pub use checkpoint::{checkpoint_id, Checkpoint, CHECKPOINT_FORMAT};
pub use losses::{gan_losses, loss_prior, loss_reconstruction, vanilla_gan_losses, LossBundle};
pub use model::{standard_normal, DiscriminatorNet, EncoderNet, GeneratorNet, Group, Model};

use crate::autodiff::AutodiffError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NetsError {
    #[error("invalid architecture: {0}")]
    Arch(String),
    #[error("parameter layout: {0}")]
    Layout(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("model has no encoder")]
    NoEncoder,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("checkpoint line {line}: {detail}")]
    Checkpoint { line: usize, detail: String },
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
}
