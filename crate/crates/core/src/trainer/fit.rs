use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{adam_step, StepRecord, TrainConfig, TrainError, TrainLog};
use crate::autodiff::{Bindings, Graph, NodeId, ParamId, Tensor};
use crate::datapipe::{DataError, DayMatrix, Units};
use crate::nets::{standard_normal, ArchConfig, Group, LossBundle, Model, ModelKind};

/// Called after every epoch whose number is a multiple of
/// `checkpoint_every`, and after the final epoch.
pub type EpochHook<'a> = dyn FnMut(&Model, &TrainLog) -> Result<(), TrainError> + 'a;

/// Random stream for one epoch. Depends only on the run seed and the epoch
/// number, so a run resumed at an epoch boundary draws the same numbers as
/// an uninterrupted one.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    rng
}

/// Trains a fresh VAE-GAN on normalized day profiles.
pub fn train_vaegan(data: &DayMatrix, cfg: &TrainConfig, arch: &ArchConfig) -> Result<(Model, TrainLog), TrainError> {
    train(ModelKind::VaeGan, data, cfg, arch)
}

/// Trains a fresh vanilla GAN on normalized day profiles.
pub fn train_gan(data: &DayMatrix, cfg: &TrainConfig, arch: &ArchConfig) -> Result<(Model, TrainLog), TrainError> {
    train(ModelKind::Gan, data, cfg, arch)
}

pub fn train(
    kind: ModelKind,
    data: &DayMatrix,
    cfg: &TrainConfig,
    arch: &ArchConfig,
) -> Result<(Model, TrainLog), TrainError> {
    let mut model = Model::new(kind, arch.clone(), cfg.seed)?;
    let mut log = TrainLog::new();
    fit(&mut model, data, cfg, &mut log, &mut |_, _| Ok(()))?;
    Ok((model, log))
}

/// Runs epochs `model.epochs_done + 1 ..= cfg.epochs`, appending to `log`.
pub fn fit(
    model: &mut Model,
    data: &DayMatrix,
    cfg: &TrainConfig,
    log: &mut TrainLog,
    hook: &mut EpochHook<'_>,
) -> Result<(), TrainError> {
    cfg.validate()?;
    if data.units() != Units::Normalized {
        return Err(DataError::NotNormalized.into());
    }
    if data.is_empty() {
        return Err(TrainError::Config("no training days".into()));
    }
    if model.arch.seq_len != crate::datapipe::DAY_LEN {
        return Err(TrainError::Config(format!(
            "model sequence length {} does not match day length {}",
            model.arch.seq_len,
            crate::datapipe::DAY_LEN
        )));
    }
    model.norm = data.norm();
    model.series_kind = Some(data.kind());

    let rows = data.rows();
    let t = model.arch.seq_len;
    for epoch in model.epochs_done + 1..=cfg.epochs {
        let started = Instant::now();
        let mut rng = epoch_rng(cfg.seed, epoch);
        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mut values = Vec::with_capacity(chunk.len() * t);
            for &i in chunk {
                values.extend_from_slice(data.row(i));
            }
            let x = Tensor::new(vec![chunk.len(), t], values).expect("batch shape");
            let step = model.steps_done + 1;
            let (losses, recon_mse) = match model.kind {
                ModelKind::VaeGan => vaegan_step(model, &x, cfg, &mut rng)?,
                ModelKind::Gan => (gan_step(model, &x, cfg, &mut rng)?, None),
            };
            if let Some((term, value)) = losses.first_non_finite() {
                return Err(TrainError::Diverged { epoch, step, term, value });
            }
            model.steps_done = step;
            log.push(StepRecord { step, epoch, losses, recon_mse });
        }
        model.epochs_done = epoch;
        log.timings.push((epoch, started.elapsed().as_secs_f64()));
        let due = cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0;
        if due || epoch == cfg.epochs {
            hook(model, log)?;
        }
    }
    Ok(())
}

fn update(
    model: &mut Model,
    graph: &mut Graph,
    root: NodeId,
    ids: &[ParamId],
    lr: f64,
    cfg: &TrainConfig,
) -> Result<(), TrainError> {
    for &id in ids {
        model.params.get_mut(id).grad = Tensor::zeros(model.params.get(id).shape());
    }
    graph.backward_to(root, &mut model.params, ids).map_err(crate::nets::NetsError::from)?;
    for &id in ids {
        let p = model.params.get_mut(id);
        if !p.grad.all_finite() {
            return Err(TrainError::Diverged {
                epoch: model.epochs_done + 1,
                step: model.steps_done + 1,
                term: "gradient",
                value: f64::NAN,
            });
        }
        adam_step(p, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    }
    Ok(())
}

struct VaeGanGraph {
    graph: Graph,
    l_prior: NodeId,
    recon_mse: NodeId,
    l_rec: NodeId,
    l_dg: NodeId,
    l_gen: NodeId,
    l_real: NodeId,
    l_fake: NodeId,
    l_noise: NodeId,
    l_d: NodeId,
}

/// Builds and evaluates every VAE-GAN loss term for one batch.
fn vaegan_forward(
    model: &Model,
    x: &Tensor,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<VaeGanGraph, TrainError> {
    let arch = &model.arch;
    let b = x.shape()[0];
    let encoder = model.encoder.as_ref().ok_or(crate::nets::NetsError::NoEncoder)?;
    let eps = standard_normal(&[b, arch.latent_dim], rng);
    let noise = standard_normal(&[b, arch.seq_len], rng);
    let prior = cfg.fake_from_prior.then(|| standard_normal(&[b, arch.latent_dim], rng));

    let mut g = Graph::new();
    let xin = g.input("x");
    let ein = g.input("eps");
    let nin = g.input("noise");
    let (mean, logvar) = encoder.build(&mut g, xin, arch);
    let z = g.reparameterize(mean, logvar, ein);
    let x_hat = model.generator.build(&mut g, z, arch);

    let d_real = model.discriminator.build(&mut g, xin, arch);
    let d_rec = model.discriminator.build(&mut g, x_hat, arch);
    let d_noise = model.discriminator.build(&mut g, nin, arch);

    let l_prior = g.kl_prior(mean, logvar);
    let recon_mse = g.mse(x_hat, xin);
    let sq = g.affine(recon_mse, arch.seq_len as f64, 0.0);
    let l_rec = g.add(l_prior, sq);

    let l_real = g.bce_with_logits(d_real, 1.0);
    let rec_fake = g.bce_with_logits(d_rec, 0.0);
    let rec_fool = g.bce_with_logits(d_rec, 1.0);
    let mut bindings = Bindings::new().with(xin, x.clone()).with(ein, eps).with(nin, noise);
    let (l_fake, l_dg) = match prior {
        None => (rec_fake, rec_fool),
        Some(zp) => {
            let pin = g.input("z_prior");
            bindings.insert(pin, zp);
            let x_prior = model.generator.build(&mut g, pin, arch);
            let d_prior = model.discriminator.build(&mut g, x_prior, arch);
            let prior_fake = g.bce_with_logits(d_prior, 0.0);
            let prior_fool = g.bce_with_logits(d_prior, 1.0);
            let f = g.add(rec_fake, prior_fake);
            let d = g.add(rec_fool, prior_fool);
            (g.affine(f, 0.5, 0.0), g.affine(d, 0.5, 0.0))
        }
    };
    let l_noise = g.bce_with_logits(d_noise, 0.0);
    let l_gen = g.add(l_rec, l_dg);
    let real_fake = g.add(l_real, l_fake);
    let l_d = g.add(real_fake, l_noise);

    g.forward(&model.params, &bindings).map_err(crate::nets::NetsError::from)?;
    Ok(VaeGanGraph { graph: g, l_prior, recon_mse, l_rec, l_dg, l_gen, l_real, l_fake, l_noise, l_d })
}

/// One VAE-GAN iteration. Every loss and gradient comes from the same
/// forward pass over the pre-update parameters; D, E and G are then updated
/// in that order.
fn vaegan_step(
    model: &mut Model,
    x: &Tensor,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(LossBundle, Option<f64>), TrainError> {
    let mut f = vaegan_forward(model, x, cfg, rng)?;
    let s = |g: &Graph, n: NodeId| g.scalar(n).expect("evaluated");
    let g = &f.graph;
    let losses = LossBundle {
        l_prior: s(g, f.l_prior),
        l_reconstruction: s(g, f.l_rec),
        l_dg: s(g, f.l_dg),
        l_generator: s(g, f.l_gen),
        l_real: s(g, f.l_real),
        l_fake: s(g, f.l_fake),
        l_noise: s(g, f.l_noise),
        l_d: s(g, f.l_d),
    };
    let recon_mse = s(g, f.recon_mse);
    if losses.first_non_finite().is_some() {
        return Ok((losses, Some(recon_mse)));
    }

    let disc = model.group_ids(Group::Discriminator);
    let enc = model.group_ids(Group::Encoder);
    let gen = model.group_ids(Group::Generator);
    update(model, &mut f.graph, f.l_d, &disc, cfg.lr_d, cfg)?;
    for _ in 1..cfg.d_steps_per_g_step {
        let mut extra = vaegan_forward(model, x, cfg, rng)?;
        update(model, &mut extra.graph, extra.l_d, &disc, cfg.lr_d, cfg)?;
    }
    update(model, &mut f.graph, f.l_rec, &enc, cfg.lr_g, cfg)?;
    update(model, &mut f.graph, f.l_gen, &gen, cfg.lr_g, cfg)?;
    Ok((losses, Some(recon_mse)))
}

struct GanGraph {
    graph: Graph,
    l_real: NodeId,
    l_fake: NodeId,
    d_loss: NodeId,
    g_loss: NodeId,
}

fn gan_forward(model: &Model, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<GanGraph, TrainError> {
    let arch = &model.arch;
    let z = standard_normal(&[x.shape()[0], arch.latent_dim], rng);
    let mut g = Graph::new();
    let xin = g.input("x");
    let zin = g.input("z");
    let fake = model.generator.build(&mut g, zin, arch);
    let d_real = model.discriminator.build(&mut g, xin, arch);
    let d_fake = model.discriminator.build(&mut g, fake, arch);
    let l_real = g.bce_with_logits(d_real, 1.0);
    let l_fake = g.bce_with_logits(d_fake, 0.0);
    let d_loss = g.add(l_real, l_fake);
    let g_loss = g.bce_with_logits(d_fake, 1.0);
    g.forward(&model.params, &Bindings::new().with(xin, x.clone()).with(zin, z))
        .map_err(crate::nets::NetsError::from)?;
    Ok(GanGraph { graph: g, l_real, l_fake, d_loss, g_loss })
}

/// One vanilla GAN iteration. The generator loss is logged as both `l_dg`
/// and `l_generator`, the discriminator loss as `l_d`; prior,
/// reconstruction and noise terms do not exist and are zero.
fn gan_step(model: &mut Model, x: &Tensor, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<LossBundle, TrainError> {
    let mut f = gan_forward(model, x, rng)?;
    let s = |n: NodeId| f.graph.scalar(n).expect("evaluated");
    let g_loss = s(f.g_loss);
    let losses = LossBundle {
        l_dg: g_loss,
        l_generator: g_loss,
        l_real: s(f.l_real),
        l_fake: s(f.l_fake),
        l_d: s(f.d_loss),
        ..Default::default()
    };
    if losses.first_non_finite().is_some() {
        return Ok(losses);
    }
    let disc = model.group_ids(Group::Discriminator);
    let gen = model.group_ids(Group::Generator);
    update(model, &mut f.graph, f.d_loss, &disc, cfg.lr_d, cfg)?;
    for _ in 1..cfg.d_steps_per_g_step {
        let mut extra = gan_forward(model, x, rng)?;
        update(model, &mut extra.graph, extra.d_loss, &disc, cfg.lr_d, cfg)?;
    }
    update(model, &mut f.graph, f.g_loss, &gen, cfg.lr_g, cfg)?;
    Ok(losses)
}
