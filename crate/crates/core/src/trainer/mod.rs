//! Alternating adversarial optimization with seeded, bit-reproducible runs.

mod adam;
mod fit;
mod log;

pub use adam::adam_step;
pub use fit::{epoch_rng, fit, train, train_gan, train_vaegan, EpochHook};
pub use log::{EpochSummary, StepRecord, TrainLog};

use crate::datapipe::DataError;
use crate::nets::NetsError;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Nets(#[from] NetsError),
    #[error("training diverged at epoch {epoch}, step {step}: {term} = {value}")]
    Diverged { epoch: usize, step: u64, term: &'static str, value: f64 },
    #[error("{0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Step size for encoder and generator.
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub d_steps_per_g_step: usize,
    /// Epochs between checkpoint hooks; 0 disables them.
    pub checkpoint_every: usize,
    /// Also show the discriminator prior samples `G(z)` as fakes (VAE-GAN only).
    pub fake_from_prior: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            lr_g: 2e-4,
            lr_d: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            d_steps_per_g_step: 1,
            checkpoint_every: 0,
            fake_from_prior: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.d_steps_per_g_step == 0 {
            return bad("d_steps_per_g_step must be at least 1".into());
        }
        for (name, v) in [("lr_g", self.lr_g), ("lr_d", self.lr_d), ("adam_eps", self.adam_eps)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1), got {v}"));
            }
        }
        Ok(())
    }
}
