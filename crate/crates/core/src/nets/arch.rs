use std::fmt;
use std::str::FromStr;

use crate::datapipe::DAY_LEN;

/// Which generative model a parameter set belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    VaeGan,
    Gan,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::VaeGan => "vaegan",
            ModelKind::Gan => "gan",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vaegan" => Ok(ModelKind::VaeGan),
            "gan" => Ok(ModelKind::Gan),
            other => Err(format!("model must be `vaegan` or `gan`, got {other:?}")),
        }
    }
}

/// Layer sizes shared by encoder, generator and discriminator.
#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    /// Samples per sequence.
    pub seq_len: usize,
    pub latent_dim: usize,
    /// Width of every convolution in the stacks.
    pub channels: usize,
    pub kernel_size: usize,
    /// One convolution layer per entry.
    pub dilations: Vec<usize>,
    pub leaky_slope: f64,
    /// Encoder log-variance is clamped to `[-logvar_clamp, logvar_clamp]`.
    pub logvar_clamp: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            seq_len: DAY_LEN,
            latent_dim: 32,
            channels: 32,
            kernel_size: 3,
            dilations: vec![1, 2, 4, 8],
            leaky_slope: 0.2,
            logvar_clamp: 10.0,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.seq_len == 0 || self.latent_dim == 0 || self.channels == 0 || self.kernel_size == 0 {
            return Err("seq_len, latent_dim, channels and kernel_size must be positive".into());
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return Err("need at least one conv layer and every dilation >= 1".into());
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(format!("leaky slope {} outside [0, 1)", self.leaky_slope));
        }
        if self.logvar_clamp.is_nan() || self.logvar_clamp <= 0.0 {
            return Err("logvar clamp must be positive".into());
        }
        Ok(())
    }

    /// Number of past samples visible to the last layer of a conv stack.
    pub fn receptive_field(&self) -> usize {
        1 + self.dilations.iter().map(|d| (self.kernel_size - 1) * d).sum::<usize>()
    }
}
