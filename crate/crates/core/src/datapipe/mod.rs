//! Smart-meter ingestion: CSV reading, quarter-hour resampling, complete-day
//! selection, and min-max normalization into `N × 96` day matrices.

mod days;
mod series;
pub mod toy;

use std::path::Path;

pub use days::{
    clean_days, column_names, denormalize, normalize, normalize_with, sidecar_path, DayMatrix, NormRange, SeriesKind,
    Units, DAY_LEN, SLOT_MINUTES,
};
pub use series::{load_csv, parse_timestamp, resample, ColumnSpec, TimeSeries};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DataError {
    #[error("{path}: {detail}")]
    Io { path: String, detail: String },
    #[error("{path}: no column named {column:?}")]
    MissingColumn { path: String, column: String },
    #[error("line {line}: {detail}")]
    Parse { line: u64, detail: String },
    #[error("line {line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { line: u64, timestamp: String },
    #[error("timestamps not strictly increasing at {timestamp}")]
    NonMonotonic { timestamp: String },
    #[error("{timestamp} is not on the {period_minutes}-minute sampling grid")]
    OffGrid { timestamp: String, period_minutes: u32 },
    #[error("invalid power reading {value} at {timestamp}")]
    InvalidReading { timestamp: String, value: f64 },
    #[error("{path}: no readings")]
    Empty { path: String },
    #[error("cannot infer a whole-minute sampling period")]
    CannotInferPeriod,
    #[error("sampling period must be positive, got {0}")]
    InvalidPeriod(u32),
    #[error("target period {target_minutes} min is not a multiple of source period {source_minutes} min")]
    PeriodNotMultiple { source_minutes: u32, target_minutes: u32 },
    #[error("expected a {expected}-minute series, got {got}-minute")]
    WrongPeriod { expected: u32, got: u32 },
    #[error("no complete day in the series")]
    NoCompleteDays,
    #[error("data is constant; min-max normalization undefined")]
    ConstantData,
    #[error("matrix has no normalization range")]
    MissingNormalization,
    #[error("matrix is already normalized")]
    AlreadyNormalized,
    #[error("matrix is not normalized")]
    NotNormalized,
    #[error("{path}: {detail}")]
    Format { path: String, detail: String },
}

impl DataError {
    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        DataError::Io { path: path.display().to_string(), detail: err.to_string() }
    }
}
