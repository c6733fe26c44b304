//! Fidelity metrics between real and synthetic day profiles.

mod kl;
mod mmd;
mod shape;
mod wasserstein;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datapipe::{DayMatrix, Units, DAY_LEN};

pub use kl::{kl_divergence, kl_from_masses, shared_edges, Histogram, KlOutcome};
pub use mmd::{median_heuristic, mmd_rbf};
pub use shape::{aggregate_stats, load_shape, percentile, DayShape, LoadShapeStats, Summary, SLOT_HOURS};
pub use wasserstein::wasserstein1;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("kernel bandwidth must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("sample length is not a multiple of the point dimension")]
    DimensionMismatch,
    #[error("histogram needs at least one bin")]
    ZeroBins,
    #[error("histogram edges must be ascending")]
    BadEdges,
    #[error("non-finite sample")]
    NonFinite,
    #[error("need 0 < alpha_low < alpha_high <= 1, got alpha_high={alpha_high}, alpha_low={alpha_low}")]
    BadAlphas { alpha_high: f64, alpha_low: f64 },
    #[error("metrics need matrices in watts")]
    NotWatts,
    #[error("{0}")]
    Io(String),
}

/// How the RBF bandwidth is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SigmaMode {
    /// Median pairwise distance of the pooled samples.
    Median,
    Fixed(f64),
}

impl fmt::Display for SigmaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaMode::Median => f.write_str("median"),
            SigmaMode::Fixed(s) => write!(f, "{s}"),
        }
    }
}

impl FromStr for SigmaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "median" {
            return Ok(SigmaMode::Median);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(SigmaMode::Fixed(v)),
            _ => Err(format!("sigma must be `median` or a positive number, got {s:?}")),
        }
    }
}

/// What one MMD sample point is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MmdMode {
    /// Each 96-reading day is one point.
    DayVectors,
    /// Each individual reading is one scalar point.
    PooledReadings,
}

impl fmt::Display for MmdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MmdMode::DayVectors => "days",
            MmdMode::PooledReadings => "readings",
        })
    }
}

impl FromStr for MmdMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "days" => Ok(MmdMode::DayVectors),
            "readings" => Ok(MmdMode::PooledReadings),
            other => Err(format!("mmd mode must be `days` or `readings`, got {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsConfig {
    pub bins: usize,
    pub smoothing_eps: f64,
    pub sigma: SigmaMode,
    pub mmd_mode: MmdMode,
    /// Largest pool used for the median bandwidth heuristic.
    pub median_cap: usize,
    pub alpha_high: f64,
    pub alpha_low: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            bins: 100,
            smoothing_eps: 1e-10,
            sigma: SigmaMode::Median,
            mmd_mode: MmdMode::DayVectors,
            median_cap: 1000,
            alpha_high: 0.9,
            alpha_low: 0.1,
        }
    }
}

/// Settings echoed into every report so results can be reproduced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSettings {
    pub units: String,
    pub kl_flattening: String,
    pub bins: usize,
    pub smoothing_eps: f64,
    pub mmd_mode: String,
    pub sigma_mode: String,
    pub sigma: f64,
    pub median_cap: usize,
    pub alpha_high: f64,
    pub alpha_low: f64,
    pub percentile_method: String,
}

/// Distances and load-shape statistics of one synthetic set against real data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: String,
    /// Generator that produced the synthetic set, when known.
    pub model: Option<String>,
    pub kind: String,
    pub real_days: usize,
    pub synth_days: usize,
    pub kl: f64,
    pub mmd: f64,
    pub wasserstein: f64,
    pub real_stats: LoadShapeStats,
    pub synth_stats: LoadShapeStats,
    pub config: ReportSettings,
}

pub const REPORT_FORMAT: &str = "loadsynth-metrics-v1";

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        serde_json::from_str(text).map_err(|e| MetricsError::Io(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), MetricsError> {
        std::fs::write(path, self.to_json()).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, MetricsError> {
        let text = std::fs::read_to_string(path).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn require_watts(m: &DayMatrix) -> Result<(), MetricsError> {
    if m.units() != Units::Watts {
        return Err(MetricsError::NotWatts);
    }
    if m.is_empty() {
        return Err(MetricsError::Empty("day matrix"));
    }
    Ok(())
}

/// Bandwidth and point dimension actually used for MMD under `config`.
pub fn mmd_setup(real: &DayMatrix, synth: &DayMatrix, config: &MetricsConfig) -> Result<(f64, usize), MetricsError> {
    let dim = match config.mmd_mode {
        MmdMode::DayVectors => DAY_LEN,
        MmdMode::PooledReadings => 1,
    };
    let sigma = match config.sigma {
        SigmaMode::Fixed(s) => s,
        SigmaMode::Median => median_heuristic(real.values(), synth.values(), dim, config.median_cap)?,
    };
    Ok((sigma, dim))
}

/// Computes every distance and both statistics tables for a pair of
/// matrices in watts.
pub fn full_report(real: &DayMatrix, synth: &DayMatrix, config: &MetricsConfig) -> Result<MetricsReport, MetricsError> {
    require_watts(real)?;
    require_watts(synth)?;
    let kl = kl_divergence(real.values(), synth.values(), config.bins, config.smoothing_eps)?;
    let (sigma, dim) = mmd_setup(real, synth, config)?;
    let mmd = mmd_rbf(real.values(), synth.values(), dim, sigma)?;
    let wasserstein = wasserstein1(real.values(), synth.values())?;
    let real_stats = aggregate_stats(real.values(), DAY_LEN, config.alpha_high, config.alpha_low)?;
    let synth_stats = aggregate_stats(synth.values(), DAY_LEN, config.alpha_high, config.alpha_low)?;
    Ok(MetricsReport {
        format: REPORT_FORMAT.into(),
        model: None,
        kind: real.kind().to_string(),
        real_days: real.rows(),
        synth_days: synth.rows(),
        kl: kl.value,
        mmd,
        wasserstein,
        real_stats,
        synth_stats,
        config: ReportSettings {
            units: "watts".into(),
            kl_flattening: "pooled-readings".into(),
            bins: config.bins,
            smoothing_eps: config.smoothing_eps,
            mmd_mode: config.mmd_mode.to_string(),
            sigma_mode: match config.sigma {
                SigmaMode::Median => "median".into(),
                SigmaMode::Fixed(_) => "fixed".into(),
            },
            sigma,
            median_cap: config.median_cap,
            alpha_high: config.alpha_high,
            alpha_low: config.alpha_low,
            percentile_method: "linear".into(),
        },
    })
}

/// Writes the shared-edge histograms behind the KL value as CSV with columns
/// `bin_left,bin_right,real_mass,synth_mass`.
pub fn write_histogram_csv(
    real: &DayMatrix,
    synth: &DayMatrix,
    config: &MetricsConfig,
    path: &Path,
) -> Result<(), MetricsError> {
    require_watts(real)?;
    require_watts(synth)?;
    let kl = kl_divergence(real.values(), synth.values(), config.bins, config.smoothing_eps)?;
    let mut out = String::from("bin_left,bin_right,real_mass,synth_mass\n");
    let edges = kl.real.edges();
    for (i, (p, q)) in kl.real.masses().iter().zip(kl.synth.masses()).enumerate() {
        out.push_str(&format!("{},{},{},{}\n", edges[i], edges[i + 1], p, q));
    }
    std::fs::write(path, out).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))
}
