//! Plain-text checkpoint container.
//!
//! ```text
//! loadsynth-checkpoint-v1
//! model=vaegan
//! seed=7
//! ...                      (more key=value header lines)
//! params=22
//! param enc.conv0.w 32,1,3 step=400
//! value <floats>
//! moment1 <floats>
//! moment2 <floats>
//! ...
//! end
//! ```
//!
//! Floats are written in shortest round-trip scientific notation, so a
//! save/load cycle reproduces every bit.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::{ArchConfig, Model, ModelKind, NetsError};
use crate::autodiff::{Param, ParamStore, Tensor};
use crate::datapipe::NormRange;
use crate::kvfile::KvDoc;

pub const CHECKPOINT_FORMAT: &str = "loadsynth-checkpoint-v1";

/// A model plus free-form metadata (`meta.*` header keys).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub meta: KvDoc,
}

/// First 16 hex digits of the SHA-256 of a checkpoint file's bytes.
pub fn checkpoint_id(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn floats(out: &mut String, tag: &str, t: &Tensor) {
    out.push_str(tag);
    for v in t.data() {
        out.push(' ');
        out.push_str(&format!("{v:e}"));
    }
    out.push('\n');
}

fn bad(line: usize, detail: impl Into<String>) -> NetsError {
    NetsError::Checkpoint { line, detail: detail.into() }
}

impl Checkpoint {
    pub fn new(model: Model) -> Self {
        Self { model, meta: KvDoc::new() }
    }

    pub fn to_text(&self) -> String {
        let m = &self.model;
        let mut head = KvDoc::new();
        head.set("model", m.kind);
        head.set("seed", m.seed);
        head.set("epochs_done", m.epochs_done);
        head.set("steps_done", m.steps_done);
        head.set("arch.seq_len", m.arch.seq_len);
        head.set("arch.latent_dim", m.arch.latent_dim);
        head.set("arch.channels", m.arch.channels);
        head.set("arch.kernel_size", m.arch.kernel_size);
        let dil: Vec<String> = m.arch.dilations.iter().map(|d| d.to_string()).collect();
        head.set("arch.dilations", dil.join(","));
        head.set("arch.leaky_slope", format!("{:e}", m.arch.leaky_slope));
        head.set("arch.logvar_clamp", format!("{:e}", m.arch.logvar_clamp));
        if let Some(norm) = m.norm {
            head.set("norm_min", format!("{:e}", norm.min));
            head.set("norm_max", format!("{:e}", norm.max));
        }
        if let Some(kind) = m.series_kind {
            head.set("series_kind", kind);
        }
        for (k, v) in self.meta.iter() {
            head.set(format!("meta.{k}"), v);
        }
        head.set("params", m.params.len());

        let mut out = format!("{CHECKPOINT_FORMAT}\n{head}");
        if !out.ends_with('\n') {
            out.push('\n');
        }
        for (_, name, p) in m.params.iter() {
            let shape: Vec<String> = p.shape().iter().map(|d| d.to_string()).collect();
            out.push_str(&format!("param {name} {} step={}\n", shape.join(","), p.step));
            floats(&mut out, "value", &p.value);
            floats(&mut out, "moment1", &p.moment1);
            floats(&mut out, "moment2", &p.moment2);
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NetsError> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&CHECKPOINT_FORMAT) {
            return Err(bad(1, format!("expected `{CHECKPOINT_FORMAT}` header")));
        }
        let body_start = lines
            .iter()
            .position(|l| l.starts_with("param "))
            .unwrap_or_else(|| lines.iter().position(|l| *l == "end").unwrap_or(lines.len()));
        let head = KvDoc::parse(&lines[1..body_start].join("\n")).map_err(|e| bad(1, e.to_string()))?;
        let get = |key: &str| head.get(key).ok_or_else(|| bad(1, format!("missing header key {key}")));
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, NetsError> {
            v.parse().map_err(|_| bad(1, format!("bad value for {key}: {v:?}")))
        }

        let kind: ModelKind = get("model")?.parse().map_err(|e: String| bad(1, e))?;
        let arch = ArchConfig {
            seq_len: num("arch.seq_len", get("arch.seq_len")?)?,
            latent_dim: num("arch.latent_dim", get("arch.latent_dim")?)?,
            channels: num("arch.channels", get("arch.channels")?)?,
            kernel_size: num("arch.kernel_size", get("arch.kernel_size")?)?,
            dilations: get("arch.dilations")?.split(',').map(|d| num("arch.dilations", d)).collect::<Result<_, _>>()?,
            leaky_slope: num("arch.leaky_slope", get("arch.leaky_slope")?)?,
            logvar_clamp: num("arch.logvar_clamp", get("arch.logvar_clamp")?)?,
        };
        let seed: u64 = num("seed", get("seed")?)?;
        let count: usize = num("params", get("params")?)?;

        let mut params = ParamStore::new();
        let mut i = body_start;
        let next = |i: &mut usize, tag: &str, shape: &[usize]| -> Result<Tensor, NetsError> {
            let line_no = *i + 1;
            let line = lines.get(*i).ok_or_else(|| bad(line_no, "unexpected end of file"))?;
            *i += 1;
            let mut parts = line.split(' ');
            if parts.next() != Some(tag) {
                return Err(bad(line_no, format!("expected `{tag}` line")));
            }
            let data: Vec<f64> = parts
                .map(|v| v.parse::<f64>().map_err(|_| bad(line_no, format!("bad float {v:?}"))))
                .collect::<Result<_, _>>()?;
            Tensor::new(shape.to_vec(), data).map_err(|e| bad(line_no, e.to_string()))
        };
        for _ in 0..count {
            let line_no = i + 1;
            let line = lines.get(i).ok_or_else(|| bad(line_no, "unexpected end of file"))?;
            i += 1;
            let parts: Vec<&str> = line.split(' ').collect();
            let (name, shape, step) = match parts.as_slice() {
                ["param", name, shape, step] => (*name, *shape, *step),
                _ => return Err(bad(line_no, "expected `param <name> <shape> step=<n>`")),
            };
            let shape: Vec<usize> = shape
                .split(',')
                .map(|d| d.parse().map_err(|_| bad(line_no, format!("bad shape {shape:?}"))))
                .collect::<Result<_, _>>()?;
            let step: u64 = step
                .strip_prefix("step=")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(line_no, format!("bad step {step:?}")))?;
            let value = next(&mut i, "value", &shape)?;
            let moment1 = next(&mut i, "moment1", &shape)?;
            let moment2 = next(&mut i, "moment2", &shape)?;
            if params.find(name).is_some() {
                return Err(bad(line_no, format!("duplicate parameter {name}")));
            }
            params.insert(name, Param { grad: Tensor::zeros(&shape), value, moment1, moment2, step });
        }
        if lines.get(i) != Some(&"end") {
            return Err(bad(i + 1, "expected `end`"));
        }

        let mut model = Model::from_params(kind, arch, params, seed)?;
        model.epochs_done = num("epochs_done", get("epochs_done")?)?;
        model.steps_done = num("steps_done", get("steps_done")?)?;
        model.norm = match (head.get("norm_min"), head.get("norm_max")) {
            (Some(lo), Some(hi)) => {
                Some(NormRange::new(num("norm_min", lo)?, num("norm_max", hi)?).map_err(|e| bad(1, e.to_string()))?)
            }
            (None, None) => None,
            _ => return Err(bad(1, "norm_min and norm_max must appear together")),
        };
        model.series_kind = match head.get("series_kind") {
            Some(k) => Some(k.parse().map_err(|_| bad(1, format!("bad series_kind {k:?}")))?),
            None => None,
        };
        let mut meta = KvDoc::new();
        for (k, v) in head.iter() {
            if let Some(rest) = k.strip_prefix("meta.") {
                meta.set(rest, v);
            }
        }
        Ok(Self { model, meta })
    }

    /// Writes the checkpoint and returns its id.
    pub fn save(&self, path: &Path) -> Result<String, NetsError> {
        let text = self.to_text();
        std::fs::write(path, &text)
            .map_err(|e| NetsError::Io { path: path.display().to_string(), detail: e.to_string() })?;
        Ok(checkpoint_id(text.as_bytes()))
    }

    /// Reads a checkpoint and returns it with its id.
    pub fn load(path: &Path) -> Result<(Self, String), NetsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NetsError::Io { path: path.display().to_string(), detail: e.to_string() })?;
        Ok((Self::from_text(&text)?, checkpoint_id(text.as_bytes())))
    }
}
