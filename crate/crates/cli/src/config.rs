//! Flat `key=value` run configuration: defaults, file and flag overrides,
//! typed settings, and the run-directory hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use loadsynth::datapipe::SeriesKind;
use loadsynth::kvfile::KvDoc;
use loadsynth::metrics::{MetricsConfig, MmdMode, SigmaMode};
use loadsynth::nets::{ArchConfig, ModelKind};
use loadsynth::trainer::TrainConfig;
use sha2::{Digest, Sha256};

use crate::CliError;

/// What a key influences. Only `Data` and `Train` keys enter the run hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    Data,
    Train,
    /// How far training goes; the checkpoint records progress instead.
    Schedule,
    Eval,
    Place,
}

pub struct KeySpec {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
    pub scope: Scope,
}

const fn key(name: &'static str, default: &'static str, help: &'static str, scope: Scope) -> KeySpec {
    KeySpec { name, default, help, scope }
}

pub const KEYS: &[KeySpec] = &[
    key("input", "", "meter CSV to ingest (required for ingest)", Scope::Data),
    key("timestamp_column", "timestamp", "CSV column holding timestamps", Scope::Data),
    key("load_column", "aggregate_load_w", "CSV column with load in watts", Scope::Data),
    key("pv_column", "pv_w", "CSV column with PV production in watts", Scope::Data),
    key("kind", "load", "series to model: load or pv", Scope::Data),
    key("household", "default", "household label stored with the data", Scope::Data),
    key("source_period_minutes", "auto", "input sampling period, or auto to infer", Scope::Data),
    key("utc_offset_minutes", "0", "local day boundary as minutes east of UTC", Scope::Data),
    key("seed", "0", "seed for weights, shuffling, noise and sampling", Scope::Train),
    key("latent_dim", "32", "latent code size", Scope::Train),
    key("channels", "32", "channels per convolution", Scope::Train),
    key("kernel_size", "3", "convolution kernel size", Scope::Train),
    key("dilations", "1,2,4,8", "one dilated convolution per entry", Scope::Train),
    key("leaky_slope", "0.2", "LeakyReLU negative slope", Scope::Train),
    key("logvar_clamp", "10", "encoder log-variance clamp", Scope::Train),
    key("batch_size", "32", "days per minibatch", Scope::Train),
    key("lr_g", "0.0002", "Adam learning rate for encoder and generator", Scope::Train),
    key("lr_d", "0.0002", "Adam learning rate for the discriminator", Scope::Train),
    key("adam_beta1", "0.5", "Adam first-moment decay", Scope::Train),
    key("adam_beta2", "0.999", "Adam second-moment decay", Scope::Train),
    key("adam_eps", "1e-8", "Adam epsilon", Scope::Train),
    key("d_steps_per_g_step", "1", "discriminator updates per generator update", Scope::Train),
    key("fake_from_prior", "false", "also show prior samples to the discriminator", Scope::Train),
    key("epochs", "200", "total epochs to train", Scope::Schedule),
    key("checkpoint_every", "10", "save a checkpoint every k epochs (0: only at the end)", Scope::Schedule),
    key("model", "vaegan", "model kind: vaegan or gan", Scope::Place),
    key("out", "runs", "directory holding run directories", Scope::Place),
    key("n", "200", "synthetic days to generate", Scope::Eval),
    key("bins", "100", "histogram bins for KL", Scope::Eval),
    key("smoothing_eps", "1e-10", "additive smoothing of KL histogram masses", Scope::Eval),
    key("sigma", "median", "RBF bandwidth in watts, or median", Scope::Eval),
    key("mmd_mode", "days", "MMD points: days (96-dim) or readings (scalars)", Scope::Eval),
    key("median_cap", "1000", "most pooled points used by the median bandwidth", Scope::Eval),
    key("alpha_high", "0.9", "high-load band as a fraction of peak minus base", Scope::Eval),
    key("alpha_low", "0.1", "low threshold for rise and fall times", Scope::Eval),
];

fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

/// `--help` epilogue listing every key with its default.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|k| k.name.len() + k.default.len() + 1).max().unwrap_or(0);
    let mut out = String::from("Config keys (file: one key=value per line; flags win):\n");
    for k in KEYS {
        let pair = format!("{}={}", k.name, k.default);
        out.push_str(&format!("  {pair:<width$}  {}\n", k.help));
    }
    out
}

/// Resolved string values for every key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { values: KEYS.iter().map(|k| (k.name, k.default.to_string())).collect() }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        let spec = spec(key).ok_or_else(|| CliError::Usage(format!("unknown config key {key:?}")))?;
        self.values.insert(spec.name, value.into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("no key {key}"))
    }

    /// Applies every entry of `doc`, rejecting unknown keys.
    pub fn apply_doc(&mut self, doc: &KvDoc) -> Result<(), CliError> {
        for (k, v) in doc.iter() {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let doc = KvDoc::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        self.apply_doc(&doc)
    }

    /// Applies a `key=value` override.
    pub fn apply_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) =
            pair.split_once('=').ok_or_else(|| CliError::Usage(format!("expected key=value, got {pair:?}")))?;
        self.set(k.trim(), v.trim())
    }

    /// Keys that determine the data and the trained weights, in table order.
    pub fn identity_doc(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        for k in KEYS.iter().filter(|k| matches!(k.scope, Scope::Data | Scope::Train)) {
            doc.set(k.name, self.get(k.name));
        }
        doc
    }

    /// First 12 hex digits of the SHA-256 of [`RunConfig::identity_doc`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.identity_doc().to_string().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        Path::new(self.get("out")).join(format!("run-{}", self.hash()))
    }

    pub fn settings(&self) -> Result<Settings, CliError> {
        Settings::parse(self)
    }
}

/// Typed view of a [`RunConfig`].
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub input: Option<PathBuf>,
    pub timestamp_column: String,
    pub value_column: String,
    pub kind: SeriesKind,
    pub household: String,
    pub source_period_minutes: Option<u32>,
    pub utc_offset_minutes: i32,
    pub model: ModelKind,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub n: usize,
    pub metrics: MetricsConfig,
}

fn parse<T: std::str::FromStr>(cfg: &RunConfig, key: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    let raw = cfg.get(key);
    raw.parse().map_err(|e| CliError::Usage(format!("{key}={raw}: {e}")))
}

impl Settings {
    fn parse(cfg: &RunConfig) -> Result<Self, CliError> {
        let kind: SeriesKind = match cfg.get("kind") {
            "load" => SeriesKind::Load,
            "pv" => SeriesKind::Pv,
            other => return Err(CliError::Usage(format!("kind={other}: expected load or pv"))),
        };
        let value_column = match kind {
            SeriesKind::Load => cfg.get("load_column"),
            SeriesKind::Pv => cfg.get("pv_column"),
        }
        .to_string();
        let source_period_minutes = match cfg.get("source_period_minutes") {
            "auto" => None,
            _ => Some(parse(cfg, "source_period_minutes")?),
        };
        let utc_offset_minutes: i32 = parse(cfg, "utc_offset_minutes")?;
        if utc_offset_minutes.abs() >= 24 * 60 {
            return Err(CliError::Usage(format!(
                "utc_offset_minutes={utc_offset_minutes}: must lie strictly within one day"
            )));
        }
        let dilations = cfg
            .get("dilations")
            .split(',')
            .map(|d| d.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("dilations={}: {e}", cfg.get("dilations"))))?;
        let arch = ArchConfig {
            latent_dim: parse(cfg, "latent_dim")?,
            channels: parse(cfg, "channels")?,
            kernel_size: parse(cfg, "kernel_size")?,
            dilations,
            leaky_slope: parse(cfg, "leaky_slope")?,
            logvar_clamp: parse(cfg, "logvar_clamp")?,
            ..ArchConfig::default()
        };
        arch.validate().map_err(CliError::Usage)?;
        let train = TrainConfig {
            epochs: parse(cfg, "epochs")?,
            batch_size: parse(cfg, "batch_size")?,
            lr_g: parse(cfg, "lr_g")?,
            lr_d: parse(cfg, "lr_d")?,
            adam_beta1: parse(cfg, "adam_beta1")?,
            adam_beta2: parse(cfg, "adam_beta2")?,
            adam_eps: parse(cfg, "adam_eps")?,
            seed: parse(cfg, "seed")?,
            d_steps_per_g_step: parse(cfg, "d_steps_per_g_step")?,
            checkpoint_every: parse(cfg, "checkpoint_every")?,
            fake_from_prior: parse(cfg, "fake_from_prior")?,
        };
        train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let metrics = MetricsConfig {
            bins: parse(cfg, "bins")?,
            smoothing_eps: parse(cfg, "smoothing_eps")?,
            sigma: parse::<SigmaMode>(cfg, "sigma")?,
            mmd_mode: parse::<MmdMode>(cfg, "mmd_mode")?,
            median_cap: parse(cfg, "median_cap")?,
            alpha_high: parse(cfg, "alpha_high")?,
            alpha_low: parse(cfg, "alpha_low")?,
        };
        if metrics.bins == 0 {
            return Err(CliError::Usage("bins must be at least 1".into()));
        }
        if !(0.0 < metrics.alpha_low && metrics.alpha_low < metrics.alpha_high && metrics.alpha_high <= 1.0) {
            return Err(CliError::Usage(format!(
                "need 0 < alpha_low < alpha_high <= 1, got {} and {}",
                metrics.alpha_low, metrics.alpha_high
            )));
        }
        let n: usize = parse(cfg, "n")?;
        if n == 0 {
            return Err(CliError::Usage("n must be at least 1".into()));
        }
        let input = match cfg.get("input") {
            "" => None,
            p => Some(PathBuf::from(p)),
        };
        Ok(Self {
            input,
            timestamp_column: cfg.get("timestamp_column").to_string(),
            value_column,
            kind,
            household: cfg.get("household").to_string(),
            source_period_minutes,
            utc_offset_minutes,
            model: parse(cfg, "model")?,
            arch,
            train,
            n,
            metrics,
        })
    }
}
