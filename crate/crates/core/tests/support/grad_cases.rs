//! One small random graph per autodiff op kind, for finite-difference checks.

use loadsynth::autodiff::{grad_check, Bindings, Graph, NodeId, ParamId, ParamStore, Tensor};
use loadsynth::nets::{ArchConfig, Model, ModelKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OP_KINDS: [&str; 16] = [
    "param",
    "dense",
    "conv1d",
    "leaky-relu",
    "sigmoid",
    "tanh",
    "add",
    "affine",
    "clamp",
    "reshape",
    "mse",
    "bce",
    "sum",
    "mean",
    "reparameterize",
    "kl-prior",
];

pub struct Case {
    pub graph: Graph,
    pub root: NodeId,
    pub params: ParamStore,
    pub checked: Vec<ParamId>,
    pub bindings: Bindings,
}

impl Case {
    /// Largest relative error over every checked parameter.
    pub fn worst_error(&mut self, step: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for &p in &self.checked.clone() {
            let e = grad_check(&mut self.graph, self.root, &mut self.params, p, &self.bindings, step).unwrap();
            worst = worst.max(e);
        }
        worst
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Values in `[-2, 2]` at least `gap` away from every point in `avoid`.
fn away_from(rng: &mut ChaCha8Rng, n: usize, avoid: &[f64], gap: f64) -> Tensor {
    let data = (0..n)
        .map(|_| loop {
            let v: f64 = rng.random_range(-2.0..2.0);
            if avoid.iter().all(|a| (v - a).abs() > gap) {
                break v;
            }
        })
        .collect();
    Tensor::vector(data)
}

/// Builds the case for op `kind` from `seed`. Non-scalar ops are reduced to
/// a scalar through an MSE against a random target.
pub fn op_case(kind: &str, seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::new();
    let mut g = Graph::new();
    let mut bindings = Bindings::new();
    let mut checked = Vec::new();
    let mut add_param = |params: &mut ParamStore, g: &mut Graph, name: &str, t: Tensor| {
        let id = params.add(name, t);
        checked.push(id);
        g.param(id)
    };
    let target = |g: &mut Graph, bindings: &mut Bindings, rng: &mut ChaCha8Rng, shape: &[usize]| {
        let t = g.input("target");
        bindings.insert(t, random(rng, shape, -1.0, 1.0));
        t
    };

    let root = match kind {
        "param" => {
            let p = add_param(&mut params, &mut g, "p", random(&mut rng, &[6], -1.0, 1.0));
            let t = target(&mut g, &mut bindings, &mut rng, &[6]);
            g.mse(p, t)
        }
        "dense" => {
            let x = add_param(&mut params, &mut g, "x", random(&mut rng, &[3, 4], -1.0, 1.0));
            let w = add_param(&mut params, &mut g, "w", random(&mut rng, &[5, 4], -1.0, 1.0));
            let b = add_param(&mut params, &mut g, "b", random(&mut rng, &[5], -1.0, 1.0));
            let out = g.dense(x, w, b);
            let t = target(&mut g, &mut bindings, &mut rng, &[3, 5]);
            g.mse(out, t)
        }
        "conv1d" => {
            let dilation = rng.random_range(1..=3);
            let x = add_param(&mut params, &mut g, "x", random(&mut rng, &[2, 3, 10], -1.0, 1.0));
            let w = add_param(&mut params, &mut g, "w", random(&mut rng, &[4, 3, 3], -1.0, 1.0));
            let b = add_param(&mut params, &mut g, "b", random(&mut rng, &[4], -1.0, 1.0));
            let out = g.conv1d(x, w, b, dilation);
            let t = target(&mut g, &mut bindings, &mut rng, &[2, 4, 10]);
            g.mse(out, t)
        }
        "leaky-relu" | "sigmoid" | "tanh" | "affine" | "clamp" => {
            let avoid: &[f64] = match kind {
                "leaky-relu" => &[0.0],
                "clamp" => &[-0.5, 0.5],
                _ => &[],
            };
            let p = add_param(&mut params, &mut g, "p", away_from(&mut rng, 12, avoid, 1e-2));
            let out = match kind {
                "leaky-relu" => g.leaky_relu(p, 0.2),
                "sigmoid" => g.sigmoid(p),
                "tanh" => g.tanh(p),
                "affine" => {
                    let (s, c) = (rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0));
                    g.affine(p, s, c)
                }
                _ => g.clamp(p, -0.5, 0.5),
            };
            let t = target(&mut g, &mut bindings, &mut rng, &[12]);
            g.mse(out, t)
        }
        "add" => {
            let a = add_param(&mut params, &mut g, "a", random(&mut rng, &[2, 5], -1.0, 1.0));
            let b = add_param(&mut params, &mut g, "b", random(&mut rng, &[2, 5], -1.0, 1.0));
            let s = g.add(a, b);
            let s = g.tanh(s);
            let t = target(&mut g, &mut bindings, &mut rng, &[2, 5]);
            g.mse(s, t)
        }
        "reshape" => {
            let p = add_param(&mut params, &mut g, "p", random(&mut rng, &[2, 12], -1.0, 1.0));
            let r = g.reshape(p, &[3, 4]);
            let r = g.sigmoid(r);
            let t = target(&mut g, &mut bindings, &mut rng, &[2, 3, 4]);
            g.mse(r, t)
        }
        "mse" => {
            let a = add_param(&mut params, &mut g, "a", random(&mut rng, &[3, 4], -1.0, 1.0));
            let b = add_param(&mut params, &mut g, "b", random(&mut rng, &[3, 4], -1.0, 1.0));
            g.mse(a, b)
        }
        "bce" => {
            let label = rng.random_range(0.0..1.0);
            let p = add_param(&mut params, &mut g, "logits", random(&mut rng, &[7, 1], -4.0, 4.0));
            g.bce_with_logits(p, label)
        }
        "sum" | "mean" => {
            let p = add_param(&mut params, &mut g, "p", random(&mut rng, &[4, 3], -1.0, 1.0));
            let h = g.tanh(p);
            if kind == "sum" {
                g.sum(h)
            } else {
                g.mean(h)
            }
        }
        "reparameterize" => {
            let m = add_param(&mut params, &mut g, "mean", random(&mut rng, &[3, 4], -1.0, 1.0));
            let lv = add_param(&mut params, &mut g, "logvar", random(&mut rng, &[3, 4], -2.0, 2.0));
            let e = g.input("eps");
            bindings.insert(e, random(&mut rng, &[3, 4], -2.0, 2.0));
            let z = g.reparameterize(m, lv, e);
            let t = target(&mut g, &mut bindings, &mut rng, &[3, 4]);
            g.mse(z, t)
        }
        "kl-prior" => {
            let m = add_param(&mut params, &mut g, "mean", random(&mut rng, &[3, 4], -1.0, 1.0));
            let lv = add_param(&mut params, &mut g, "logvar", random(&mut rng, &[3, 4], -2.0, 2.0));
            g.kl_prior(m, lv)
        }
        other => panic!("unknown op kind {other}"),
    };
    Case { graph: g, root, params, checked, bindings }
}

/// The three VAE-GAN objectives on a tiny model (L=4, two conv layers,
/// T=16) with every weight randomized.
pub struct TinyVaeGan {
    pub graph: Graph,
    pub model: Model,
    pub bindings: Bindings,
    pub l_reconstruction: NodeId,
    pub l_generator: NodeId,
    pub l_d: NodeId,
}

pub fn tiny_vaegan(seed: u64) -> TinyVaeGan {
    let arch = ArchConfig { seq_len: 16, latent_dim: 4, channels: 3, dilations: vec![1, 2], ..ArchConfig::default() };
    let mut model = Model::new(ModelKind::VaeGan, arch.clone(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for id in model.params.ids().collect::<Vec<_>>() {
        for v in model.params.get_mut(id).value.data_mut() {
            *v = rng.random_range(-0.4..0.4);
        }
    }
    let b = 3;
    let mut g = Graph::new();
    let x = g.input("x");
    let eps = g.input("eps");
    let noise = g.input("noise");
    let bindings = Bindings::new()
        .with(x, random(&mut rng, &[b, 16], 0.0, 1.0))
        .with(eps, random(&mut rng, &[b, 4], -1.5, 1.5))
        .with(noise, random(&mut rng, &[b, 16], -2.0, 2.0));
    let enc = model.encoder.clone().unwrap();
    let (mean, logvar) = enc.build(&mut g, x, &arch);
    let z = g.reparameterize(mean, logvar, eps);
    let x_hat = model.generator.build(&mut g, z, &arch);
    let d_real = model.discriminator.build(&mut g, x, &arch);
    let d_fake = model.discriminator.build(&mut g, x_hat, &arch);
    let d_noise = model.discriminator.build(&mut g, noise, &arch);
    let prior = g.kl_prior(mean, logvar);
    let mse = g.mse(x_hat, x);
    let sq = g.affine(mse, 16.0, 0.0);
    let l_reconstruction = g.add(prior, sq);
    let l_dg = g.bce_with_logits(d_fake, 1.0);
    let l_generator = g.add(l_reconstruction, l_dg);
    let real = g.bce_with_logits(d_real, 1.0);
    let fake = g.bce_with_logits(d_fake, 0.0);
    let noise_term = g.bce_with_logits(d_noise, 0.0);
    let rf = g.add(real, fake);
    let l_d = g.add(rf, noise_term);
    TinyVaeGan { graph: g, model, bindings, l_reconstruction, l_generator, l_d }
}

impl TinyVaeGan {
    /// Largest relative error over every parameter for each objective.
    pub fn worst_error(&mut self, step: f64) -> f64 {
        let mut worst: f64 = 0.0;
        let ids: Vec<ParamId> = self.model.params.ids().collect();
        for root in [self.l_reconstruction, self.l_generator, self.l_d] {
            for &id in &ids {
                let e = grad_check(&mut self.graph, root, &mut self.model.params, id, &self.bindings, step).unwrap();
                worst = worst.max(e);
            }
        }
        worst
    }
}
