//! Loss terms on concrete values.
//!
//! Discriminator outputs are handled as logits so that every `log D` and
//! `log(1 − D)` term stays finite.

use crate::autodiff::kernels::softplus;
use crate::autodiff::Tensor;

use super::NetsError;

/// Every scalar of one VAE-GAN optimization step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBundle {
    pub l_prior: f64,
    pub l_reconstruction: f64,
    pub l_dg: f64,
    pub l_generator: f64,
    pub l_real: f64,
    pub l_fake: f64,
    pub l_noise: f64,
    pub l_d: f64,
}

impl LossBundle {
    pub const NAMES: [&'static str; 8] =
        ["l_prior", "l_reconstruction", "l_dg", "l_generator", "l_real", "l_fake", "l_noise", "l_d"];

    pub fn values(&self) -> [f64; 8] {
        [
            self.l_prior,
            self.l_reconstruction,
            self.l_dg,
            self.l_generator,
            self.l_real,
            self.l_fake,
            self.l_noise,
            self.l_d,
        ]
    }

    /// Largest violation of `l_generator = l_reconstruction + l_dg` and
    /// `l_d = l_real + l_fake + l_noise`.
    pub fn identity_error(&self) -> f64 {
        let gen = (self.l_generator - (self.l_reconstruction + self.l_dg)).abs();
        let disc = (self.l_d - (self.l_real + self.l_fake + self.l_noise)).abs();
        gen.max(disc)
    }

    /// First non-finite term, if any.
    pub fn first_non_finite(&self) -> Option<(&'static str, f64)> {
        Self::NAMES.iter().zip(self.values()).find(|(_, v)| !v.is_finite()).map(|(n, v)| (*n, v))
    }
}

/// Batch-averaged `KL(N(mean, exp(logvar)) || N(0, 1))` for `[B, L]` inputs.
pub fn loss_prior(mean: &Tensor, logvar: &Tensor) -> Result<f64, NetsError> {
    if mean.shape() != logvar.shape() {
        return Err(NetsError::Shape(format!("mean {:?} vs logvar {:?}", mean.shape(), logvar.shape())));
    }
    let batch = if mean.shape().len() >= 2 { mean.shape()[0] } else { 1 };
    let total: f64 = mean.data().iter().zip(logvar.data()).map(|(m, lv)| m * m + lv.exp() - 1.0 - lv).sum();
    Ok(0.5 * total / batch.max(1) as f64)
}

/// `l_prior` plus the squared L2 reconstruction error per sequence,
/// averaged over the batch.
pub fn loss_reconstruction(x: &Tensor, x_hat: &Tensor, l_prior: f64) -> Result<f64, NetsError> {
    if x.shape() != x_hat.shape() {
        return Err(NetsError::Shape(format!("x {:?} vs reconstruction {:?}", x.shape(), x_hat.shape())));
    }
    let batch = if x.shape().len() >= 2 { x.shape()[0] } else { 1 };
    let sq: f64 = x.data().iter().zip(x_hat.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(l_prior + sq / batch.max(1) as f64)
}

/// `−mean log σ(l)`.
fn neg_log_prob(logits: &[f64]) -> f64 {
    logits.iter().map(|&l| softplus(-l)).sum::<f64>() / logits.len() as f64
}

/// `−mean log(1 − σ(l))`.
fn neg_log_not_prob(logits: &[f64]) -> f64 {
    logits.iter().map(|&l| softplus(l)).sum::<f64>() / logits.len() as f64
}

/// Adversarial terms of the VAE-GAN from discriminator logits on real,
/// reconstructed, and pure-noise batches. Prior and reconstruction terms are
/// left at zero; `l_generator` here equals `l_dg`.
pub fn gan_losses(real_logits: &[f64], fake_logits: &[f64], noise_logits: &[f64]) -> LossBundle {
    let l_real = neg_log_prob(real_logits);
    let l_fake = neg_log_not_prob(fake_logits);
    let l_noise = neg_log_not_prob(noise_logits);
    let l_dg = neg_log_prob(fake_logits);
    LossBundle {
        l_dg,
        l_generator: l_dg,
        l_real,
        l_fake,
        l_noise,
        l_d: l_real + l_fake + l_noise,
        ..LossBundle::default()
    }
}

/// Vanilla GAN losses `(g_loss, d_loss)`; the generator uses the
/// non-saturating `−log D(G(z))`.
pub fn vanilla_gan_losses(real_logits: &[f64], fake_logits: &[f64]) -> (f64, f64) {
    let d_loss = neg_log_prob(real_logits) + neg_log_not_prob(fake_logits);
    let g_loss = neg_log_prob(fake_logits);
    (g_loss, d_loss)
}

/// Logit of a probability, for feeding probabilities to the logit-based losses.
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}
