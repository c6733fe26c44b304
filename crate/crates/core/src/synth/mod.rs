//! Synthetic day profiles drawn from a trained generator.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Tensor;
use crate::datapipe::{DataError, DayMatrix, SeriesKind, Units};
use crate::kvfile::KvDoc;
use crate::nets::{standard_normal, Model, ModelKind, NetsError};

/// Profiles are generated in chunks of this many rows.
const CHUNK: usize = 256;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SynthError {
    #[error("sample count must be at least 1")]
    ZeroCount,
    #[error("model carries no normalization range; it was never trained on data")]
    MissingNormalization,
    #[error(transparent)]
    Nets(#[from] NetsError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Where a synthetic batch came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub model: ModelKind,
    pub checkpoint_id: Option<String>,
    pub seed: u64,
    /// Number of scalar `N(0, 1)` draws consumed.
    pub latent_draws: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthBatch {
    /// Generator outputs clamped to `[0, 1]`.
    pub profiles: DayMatrix,
    /// The same profiles in watts.
    pub denorm: DayMatrix,
    pub provenance: Provenance,
}

/// Draws `n` latent codes `z ~ N(0, I)` from a ChaCha stream seeded with
/// `seed` and decodes them with the generator.
pub fn sample(model: &Model, n: usize, seed: u64) -> Result<SynthBatch, SynthError> {
    if n == 0 {
        return Err(SynthError::ZeroCount);
    }
    let norm = model.norm.ok_or(SynthError::MissingNormalization)?;
    let latent = model.arch.latent_dim;
    let t = model.arch.seq_len;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = standard_normal(&[n, latent], &mut rng);

    let mut profiles = Vec::with_capacity(n * t);
    for (start, codes) in z.data().chunks(CHUNK * latent).enumerate() {
        let rows = codes.len() / latent;
        debug_assert!(start * CHUNK + rows <= n);
        let batch = Tensor::new(vec![rows, latent], codes.to_vec()).expect("chunk shape");
        let out = model.generate(&batch)?;
        profiles.extend(out.data().iter().map(|v| v.clamp(0.0, 1.0)));
    }
    let watts = profiles.iter().map(|&v| norm.unscale(v).clamp(norm.min, norm.max)).collect();
    let kind = model.series_kind.unwrap_or(SeriesKind::Load);
    Ok(SynthBatch {
        profiles: DayMatrix::new(profiles, Vec::new(), kind, Units::Normalized, Some(norm))?,
        denorm: DayMatrix::new(watts, Vec::new(), kind, Units::Watts, Some(norm))?,
        provenance: Provenance { model: model.kind, checkpoint_id: None, seed, latent_draws: n * latent },
    })
}

impl SynthBatch {
    pub fn with_checkpoint_id(mut self, id: impl Into<String>) -> Self {
        self.provenance.checkpoint_id = Some(id.into());
        self
    }
}

/// Writes the batch in watts, one day per row, with a provenance sidecar.
pub fn export(batch: &SynthBatch, path: &Path) -> Result<(), SynthError> {
    let p = &batch.provenance;
    let mut extra = KvDoc::new();
    extra.set("model", p.model);
    extra.set("seed", p.seed);
    extra.set("checkpoint_id", p.checkpoint_id.as_deref().unwrap_or(""));
    extra.set("latent_draws", p.latent_draws);
    batch.denorm.write_csv(path, &extra)?;
    Ok(())
}

/// Mode-collapse probe: true when at least one pair of rows lies `tol` or
/// further apart in L2.
pub fn has_distinct_profiles(profiles: &DayMatrix, tol: f64) -> bool {
    let rows: Vec<&[f64]> = profiles.iter_rows().collect();
    rows.iter().enumerate().any(|(i, a)| {
        rows[i + 1..].iter().any(|b| {
            let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            d2.sqrt() >= tol
        })
    })
}
