use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{ArchConfig, ModelKind, NetsError};
use crate::autodiff::{Bindings, Graph, NodeId, ParamId, ParamStore, Tensor};
use crate::datapipe::{NormRange, SeriesKind};

/// Parameter group updated by its own optimizer step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Encoder,
    Generator,
    Discriminator,
}

impl Group {
    pub fn prefix(self) -> &'static str {
        match self {
            Group::Encoder => "enc.",
            Group::Generator => "gen.",
            Group::Discriminator => "disc.",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    /// `N(0, 1/fan_in)`.
    Scaled {
        fan_in: usize,
    },
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
struct Spec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct ConvLayer {
    w: ParamId,
    b: ParamId,
    dilation: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct DenseLayer {
    w: ParamId,
    b: ParamId,
}

fn conv_specs(out: &mut Vec<Spec>, name: &str, cin: usize, cout: usize, k: usize, init_zero: bool) {
    out.push(Spec {
        name: format!("{name}.w"),
        shape: vec![cout, cin, k],
        init: if init_zero { Init::Zero } else { Init::Scaled { fan_in: cin * k } },
    });
    out.push(Spec { name: format!("{name}.b"), shape: vec![cout], init: Init::Zero });
}

fn dense_specs(out: &mut Vec<Spec>, name: &str, fan_in: usize, fan_out: usize, init_zero: bool) {
    out.push(Spec {
        name: format!("{name}.w"),
        shape: vec![fan_out, fan_in],
        init: if init_zero { Init::Zero } else { Init::Scaled { fan_in } },
    });
    out.push(Spec { name: format!("{name}.b"), shape: vec![fan_out], init: Init::Zero });
}

/// Every parameter of a model kind, in registration order.
fn layout(kind: ModelKind, arch: &ArchConfig) -> Vec<Spec> {
    let (c, t, k, l) = (arch.channels, arch.seq_len, arch.kernel_size, arch.latent_dim);
    let mut specs = Vec::new();
    if kind == ModelKind::VaeGan {
        for (i, _) in arch.dilations.iter().enumerate() {
            let cin = if i == 0 { 1 } else { c };
            conv_specs(&mut specs, &format!("enc.conv{i}"), cin, c, k, false);
        }
        dense_specs(&mut specs, "enc.mean", c * t, l, true);
        dense_specs(&mut specs, "enc.logvar", c * t, l, true);
    }
    dense_specs(&mut specs, "gen.expand", l, c * t, false);
    for (i, _) in arch.dilations.iter().enumerate() {
        conv_specs(&mut specs, &format!("gen.conv{i}"), c, c, k, false);
    }
    conv_specs(&mut specs, "gen.out", c, 1, 1, true);
    for (i, _) in arch.dilations.iter().enumerate() {
        let cin = if i == 0 { 1 } else { c };
        conv_specs(&mut specs, &format!("disc.conv{i}"), cin, c, k, false);
    }
    dense_specs(&mut specs, "disc.head", c * t, 1, true);
    specs
}

/// Encoder: dilated causal conv trunk with mean and log-variance heads.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderNet {
    convs: Vec<ConvLayer>,
    mean_head: DenseLayer,
    logvar_head: DenseLayer,
}

/// Generator / decoder: dense expansion of `z`, conv stack, 1×1 output
/// convolution squashed into `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorNet {
    expand: DenseLayer,
    convs: Vec<ConvLayer>,
    output: ConvLayer,
}

/// Discriminator: conv stack and a dense head producing one logit.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorNet {
    convs: Vec<ConvLayer>,
    head: DenseLayer,
}

fn conv_stack(g: &mut Graph, mut h: NodeId, convs: &[ConvLayer], slope: f64) -> NodeId {
    for layer in convs {
        let w = g.param(layer.w);
        let b = g.param(layer.b);
        h = g.conv1d(h, w, b, layer.dilation);
        h = g.leaky_relu(h, slope);
    }
    h
}

fn dense(g: &mut Graph, x: NodeId, layer: &DenseLayer) -> NodeId {
    let w = g.param(layer.w);
    let b = g.param(layer.b);
    g.dense(x, w, b)
}

impl EncoderNet {
    /// Adds the encoder to `g`. `x` is `[B, T]`; returns `(mean, logvar)`, each `[B, L]`.
    pub fn build(&self, g: &mut Graph, x: NodeId, arch: &ArchConfig) -> (NodeId, NodeId) {
        let h = g.reshape(x, &[1, arch.seq_len]);
        let h = conv_stack(g, h, &self.convs, arch.leaky_slope);
        let flat = g.reshape(h, &[arch.channels * arch.seq_len]);
        let mean = dense(g, flat, &self.mean_head);
        let raw = dense(g, flat, &self.logvar_head);
        let logvar = g.clamp(raw, -arch.logvar_clamp, arch.logvar_clamp);
        g.set_label(mean, "enc.mean");
        g.set_label(logvar, "enc.logvar");
        (mean, logvar)
    }
}

impl GeneratorNet {
    /// Adds the generator to `g`. `z` is `[B, L]`; returns `[B, T]` in `[0, 1]`.
    pub fn build(&self, g: &mut Graph, z: NodeId, arch: &ArchConfig) -> NodeId {
        let h = dense(g, z, &self.expand);
        let h = g.reshape(h, &[arch.channels, arch.seq_len]);
        let h = g.leaky_relu(h, arch.leaky_slope);
        let h = conv_stack(g, h, &self.convs, arch.leaky_slope);
        let w = g.param(self.output.w);
        let b = g.param(self.output.b);
        let h = g.conv1d(h, w, b, self.output.dilation);
        let h = g.reshape(h, &[arch.seq_len]);
        let h = g.tanh(h);
        let out = g.affine(h, 0.5, 0.5);
        g.set_label(out, "gen.out");
        out
    }
}

impl DiscriminatorNet {
    /// Adds the discriminator to `g`. `x` is `[B, T]`; returns logits `[B, 1]`.
    pub fn build(&self, g: &mut Graph, x: NodeId, arch: &ArchConfig) -> NodeId {
        let h = g.reshape(x, &[1, arch.seq_len]);
        let h = conv_stack(g, h, &self.convs, arch.leaky_slope);
        let flat = g.reshape(h, &[arch.channels * arch.seq_len]);
        let logit = dense(g, flat, &self.head);
        g.set_label(logit, "disc.logit");
        logit
    }
}

/// All trainable state of one generative model plus the metadata needed to
/// use it: architecture, seed, and the scaling of its training data.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub arch: ArchConfig,
    pub params: ParamStore,
    pub encoder: Option<EncoderNet>,
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub seed: u64,
    /// Min-max range of the training data, required to emit watts.
    pub norm: Option<NormRange>,
    pub series_kind: Option<SeriesKind>,
    pub epochs_done: usize,
    pub steps_done: u64,
}

impl Model {
    /// Fresh model with weights drawn from a ChaCha stream seeded by `seed`.
    pub fn new(kind: ModelKind, arch: ArchConfig, seed: u64) -> Result<Self, NetsError> {
        arch.validate().map_err(NetsError::Arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for spec in layout(kind, &arch) {
            let len: usize = spec.shape.iter().product();
            let data = match spec.init {
                Init::Zero => vec![0.0; len],
                Init::Scaled { fan_in } => {
                    let std = (1.0 / fan_in as f64).sqrt();
                    (0..len).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
                }
            };
            params.add(spec.name, Tensor::new(spec.shape, data)?);
        }
        Self::from_params(kind, arch, params, seed)
    }

    /// Wires networks onto an existing parameter store, checking that every
    /// expected parameter exists with the right shape and nothing else does.
    pub fn from_params(kind: ModelKind, arch: ArchConfig, params: ParamStore, seed: u64) -> Result<Self, NetsError> {
        arch.validate().map_err(NetsError::Arch)?;
        let specs = layout(kind, &arch);
        if specs.len() != params.len() {
            return Err(NetsError::Layout(format!(
                "expected {} parameters for {kind}, found {}",
                specs.len(),
                params.len()
            )));
        }
        for spec in &specs {
            let id =
                params.find(&spec.name).ok_or_else(|| NetsError::Layout(format!("missing parameter {}", spec.name)))?;
            if params.get(id).shape() != spec.shape.as_slice() {
                return Err(NetsError::Layout(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    spec.name,
                    params.get(id).shape(),
                    spec.shape
                )));
            }
        }
        let id = |name: String| params.find(&name).expect("checked above");
        let conv = |prefix: &str, i: usize, dilation: usize| ConvLayer {
            w: id(format!("{prefix}{i}.w")),
            b: id(format!("{prefix}{i}.b")),
            dilation,
        };
        let dense = |name: &str| DenseLayer { w: id(format!("{name}.w")), b: id(format!("{name}.b")) };
        let convs = |prefix: &str| -> Vec<ConvLayer> {
            arch.dilations.iter().enumerate().map(|(i, &d)| conv(prefix, i, d)).collect()
        };
        let encoder = (kind == ModelKind::VaeGan).then(|| EncoderNet {
            convs: convs("enc.conv"),
            mean_head: dense("enc.mean"),
            logvar_head: dense("enc.logvar"),
        });
        let generator = GeneratorNet {
            expand: dense("gen.expand"),
            convs: convs("gen.conv"),
            output: ConvLayer { w: id("gen.out.w".into()), b: id("gen.out.b".into()), dilation: 1 },
        };
        let discriminator = DiscriminatorNet { convs: convs("disc.conv"), head: dense("disc.head") };
        Ok(Self {
            kind,
            arch,
            params,
            encoder,
            generator,
            discriminator,
            seed,
            norm: None,
            series_kind: None,
            epochs_done: 0,
            steps_done: 0,
        })
    }

    pub fn group_ids(&self, group: Group) -> Vec<ParamId> {
        self.params.iter().filter(|(_, name, _)| name.starts_with(group.prefix())).map(|(id, _, _)| id).collect()
    }

    fn encoder_net(&self) -> Result<&EncoderNet, NetsError> {
        self.encoder.as_ref().ok_or(NetsError::NoEncoder)
    }

    fn check_batch(&self, x: &Tensor, width: usize, what: &str) -> Result<(), NetsError> {
        match x.shape() {
            [_, w] if *w == width => Ok(()),
            other => Err(NetsError::Shape(format!("{what} must be [B, {width}], got {other:?}"))),
        }
    }

    /// Encodes a `[B, T]` batch into `(mean, logvar)`, each `[B, L]`.
    pub fn encode(&self, x: &Tensor) -> Result<(Tensor, Tensor), NetsError> {
        let enc = self.encoder_net()?;
        self.check_batch(x, self.arch.seq_len, "encoder input")?;
        let mut g = Graph::new();
        let input = g.input("x");
        let (mean, logvar) = enc.build(&mut g, input, &self.arch);
        g.forward(&self.params, &Bindings::new().with(input, x.clone()))?;
        Ok((g.value(mean).cloned().expect("evaluated"), g.value(logvar).cloned().expect("evaluated")))
    }

    /// Decodes a `[B, L]` batch of latent codes into `[B, T]` profiles.
    pub fn generate(&self, z: &Tensor) -> Result<Tensor, NetsError> {
        self.check_batch(z, self.arch.latent_dim, "latent batch")?;
        let mut g = Graph::new();
        let input = g.input("z");
        let out = self.generator.build(&mut g, input, &self.arch);
        Ok(g.eval(out, &self.params, &Bindings::new().with(input, z.clone()))?)
    }

    /// Discriminator logits, `[B, 1]`, for a `[B, T]` batch.
    pub fn discriminate_logits(&self, x: &Tensor) -> Result<Tensor, NetsError> {
        self.check_batch(x, self.arch.seq_len, "discriminator input")?;
        let mut g = Graph::new();
        let input = g.input("x");
        let out = self.discriminator.build(&mut g, input, &self.arch);
        Ok(g.eval(out, &self.params, &Bindings::new().with(input, x.clone()))?)
    }

    /// Probability that each sequence of a `[B, T]` batch is real.
    pub fn discriminate(&self, x: &Tensor) -> Result<Vec<f64>, NetsError> {
        let logits = self.discriminate_logits(x)?;
        Ok(logits.data().iter().map(|&l| crate::autodiff::kernels::sigmoid(l)).collect())
    }

    /// Scores `batch` sequences of i.i.d. standard-normal samples with the
    /// discriminator.
    pub fn discriminate_noise<R: Rng>(&self, batch: usize, rng: &mut R) -> Result<Vec<f64>, NetsError> {
        let noise = standard_normal(&[batch, self.arch.seq_len], rng);
        self.discriminate(&noise)
    }
}

/// Tensor of i.i.d. `N(0, 1)` draws.
pub fn standard_normal<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(shape.to_vec(), data).expect("matching length")
}
