use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{FixedOffset, NaiveDate, Timelike};

use super::{DataError, TimeSeries};
use crate::kvfile::KvDoc;

/// Samples per daily profile at 15-minute resolution.
pub const DAY_LEN: usize = 96;
/// Minutes between consecutive samples of a daily profile.
pub const SLOT_MINUTES: u32 = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeriesKind {
    Load,
    Pv,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeriesKind::Load => "load",
            SeriesKind::Pv => "pv",
        })
    }
}

impl FromStr for SeriesKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "load" => Ok(SeriesKind::Load),
            "pv" => Ok(SeriesKind::Pv),
            other => Err(DataError::Format {
                path: String::new(),
                detail: format!("unknown series kind {other:?} (expected load or pv)"),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Units {
    Watts,
    /// Min-max scaled into `[0, 1]`.
    Normalized,
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::Watts => "watts",
            Units::Normalized => "normalized",
        })
    }
}

/// Global min-max scaling range, in watts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormRange {
    pub min: f64,
    pub max: f64,
}

impl NormRange {
    pub fn new(min: f64, max: f64) -> Result<Self, DataError> {
        if !(min.is_finite() && max.is_finite()) || max <= min {
            return Err(DataError::ConstantData);
        }
        Ok(Self { min, max })
    }

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    #[inline]
    pub fn scale(&self, watts: f64) -> f64 {
        (watts - self.min) / self.span()
    }

    #[inline]
    pub fn unscale(&self, unit: f64) -> f64 {
        unit * self.span() + self.min
    }
}

/// `N × 96` matrix of daily profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct DayMatrix {
    values: Vec<f64>,
    /// Calendar date of each row; empty for synthetic profiles.
    dates: Vec<NaiveDate>,
    kind: SeriesKind,
    units: Units,
    norm: Option<NormRange>,
}

impl DayMatrix {
    /// Builds a matrix from row-major values, `96` per row.
    pub fn new(
        values: Vec<f64>,
        dates: Vec<NaiveDate>,
        kind: SeriesKind,
        units: Units,
        norm: Option<NormRange>,
    ) -> Result<Self, DataError> {
        let bad = |detail: String| DataError::Format { path: String::new(), detail };
        if !values.len().is_multiple_of(DAY_LEN) {
            return Err(bad(format!("{} values do not form rows of {DAY_LEN}", values.len())));
        }
        let rows = values.len() / DAY_LEN;
        if !dates.is_empty() && dates.len() != rows {
            return Err(bad(format!("{} dates for {rows} rows", dates.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        if units == Units::Normalized && norm.is_none() {
            return Err(DataError::MissingNormalization);
        }
        Ok(Self { values, dates, kind, units, norm })
    }

    pub fn rows(&self) -> usize {
        self.values.len() / DAY_LEN
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * DAY_LEN..(i + 1) * DAY_LEN]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(DAY_LEN)
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn units(&self) -> Units {
        self.units
    }

    pub fn norm(&self) -> Option<NormRange> {
        self.norm
    }

    /// Attaches the scaling range this matrix relates to without changing values.
    pub fn with_norm(mut self, norm: NormRange) -> Self {
        self.norm = Some(norm);
        self
    }

    /// Copy of the matrix in watts, denormalizing if needed.
    pub fn to_watts(&self) -> Result<DayMatrix, DataError> {
        match self.units {
            Units::Watts => Ok(self.clone()),
            Units::Normalized => denormalize(self),
        }
    }

    /// Writes `<path>` (one day per row, header `t00..t95`) and the
    /// `<path>.meta` sidecar. `extra` entries are appended to the sidecar.
    pub fn write_csv(&self, path: &Path, extra: &KvDoc) -> Result<(), DataError> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| DataError::io(path, e))?;
        writer.write_record(column_names()).map_err(|e| DataError::io(path, e))?;
        for row in self.iter_rows() {
            writer.write_record(row.iter().map(|v| v.to_string())).map_err(|e| DataError::io(path, e))?;
        }
        writer.flush().map_err(|e| DataError::io(path, e))?;

        let mut meta = KvDoc::new();
        meta.set("kind", self.kind);
        meta.set("units", self.units);
        if let Some(norm) = self.norm {
            meta.set("norm_min", norm.min);
            meta.set("norm_max", norm.max);
        }
        meta.set("rows", self.rows());
        let dates: Vec<String> = self.dates.iter().map(|d| d.to_string()).collect();
        meta.set("days", dates.join(","));
        for (k, v) in extra.iter() {
            meta.set(k, v);
        }
        let sidecar = sidecar_path(path);
        std::fs::write(&sidecar, meta.to_string()).map_err(|e| DataError::io(&sidecar, e))
    }

    /// Reads a matrix written by [`DayMatrix::write_csv`], returning it with
    /// the full sidecar document.
    pub fn read_csv(path: &Path) -> Result<(DayMatrix, KvDoc), DataError> {
        let sidecar = sidecar_path(path);
        let text = std::fs::read_to_string(&sidecar).map_err(|e| DataError::io(&sidecar, e))?;
        let meta = KvDoc::parse(&text)
            .map_err(|e| DataError::Format { path: sidecar.display().to_string(), detail: e.to_string() })?;
        let format_err = |detail: String| DataError::Format { path: path.display().to_string(), detail };
        let field = |key: &str| meta.get(key).ok_or_else(|| format_err(format!("sidecar lacks {key}")));
        let kind: SeriesKind = field("kind")?.parse()?;
        let units = match field("units")? {
            "watts" => Units::Watts,
            "normalized" => Units::Normalized,
            other => return Err(format_err(format!("unknown units {other:?}"))),
        };
        let norm = match (meta.get("norm_min"), meta.get("norm_max")) {
            (Some(lo), Some(hi)) => {
                let lo: f64 = lo.parse().map_err(|_| format_err(format!("bad norm_min {lo:?}")))?;
                let hi: f64 = hi.parse().map_err(|_| format_err(format!("bad norm_max {hi:?}")))?;
                Some(NormRange::new(lo, hi)?)
            }
            _ => None,
        };
        let dates = match meta.get("days") {
            None | Some("") => Vec::new(),
            Some(list) => list
                .split(',')
                .map(|d| d.parse::<NaiveDate>().map_err(|_| format_err(format!("bad date {d:?}"))))
                .collect::<Result<_, _>>()?,
        };

        let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::io(path, e))?;
        let header = reader.headers().map_err(|e| DataError::io(path, e))?;
        if header.len() != DAY_LEN {
            return Err(format_err(format!("expected {DAY_LEN} columns, found {}", header.len())));
        }
        let mut values = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| DataError::io(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            for cell in record.iter() {
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| DataError::Parse { line, detail: format!("bad value {cell:?}") })?;
                values.push(v);
            }
        }
        let matrix = DayMatrix::new(values, dates, kind, units, norm).map_err(|e| match e {
            DataError::Format { detail, .. } => format_err(detail),
            other => other,
        })?;
        Ok((matrix, meta))
    }
}

/// `t00, t01, …, t95`.
pub fn column_names() -> Vec<String> {
    (0..DAY_LEN).map(|i| format!("t{i:02}")).collect()
}

/// `<path>.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Keeps only local calendar days whose 96 quarter-hour slots all hold a
/// reading. `day_offset` sets where local midnight falls relative to UTC.
pub fn clean_days(series: &TimeSeries, kind: SeriesKind, day_offset: FixedOffset) -> Result<DayMatrix, DataError> {
    if series.period_minutes() != SLOT_MINUTES {
        return Err(DataError::WrongPeriod { expected: SLOT_MINUTES, got: series.period_minutes() });
    }
    let mut days: BTreeMap<NaiveDate, [Option<f64>; DAY_LEN]> = BTreeMap::new();
    for (t, v) in series.timestamps().iter().zip(series.values()) {
        let local = t.with_timezone(&day_offset);
        let minute = local.time().num_seconds_from_midnight() / 60;
        if local.time().second() != 0 || minute % SLOT_MINUTES != 0 {
            return Err(DataError::OffGrid { timestamp: t.to_rfc3339(), period_minutes: SLOT_MINUTES });
        }
        let slot = (minute / SLOT_MINUTES) as usize;
        days.entry(local.date_naive()).or_insert([None; DAY_LEN])[slot] = *v;
    }
    let mut values = Vec::new();
    let mut dates = Vec::new();
    for (date, slots) in days {
        if slots.iter().all(Option::is_some) {
            values.extend(slots.iter().map(|v| v.expect("complete day")));
            dates.push(date);
        }
    }
    if dates.is_empty() {
        return Err(DataError::NoCompleteDays);
    }
    DayMatrix::new(values, dates, kind, Units::Watts, None)
}

/// Min-max scales a watts matrix to `[0, 1]` using its global min and max.
pub fn normalize(matrix: &DayMatrix) -> Result<DayMatrix, DataError> {
    if matrix.units != Units::Watts {
        return Err(DataError::AlreadyNormalized);
    }
    let (lo, hi) = matrix.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let norm = NormRange::new(lo, hi)?;
    normalize_with(matrix, norm)
}

/// Scales a watts matrix with a given range. Values outside the range map
/// outside `[0, 1]`.
pub fn normalize_with(matrix: &DayMatrix, norm: NormRange) -> Result<DayMatrix, DataError> {
    if matrix.units != Units::Watts {
        return Err(DataError::AlreadyNormalized);
    }
    let values = matrix.values.iter().map(|&v| norm.scale(v)).collect();
    DayMatrix::new(values, matrix.dates.clone(), matrix.kind, Units::Normalized, Some(norm))
}

/// Maps a normalized matrix back to watts with its stored range.
pub fn denormalize(matrix: &DayMatrix) -> Result<DayMatrix, DataError> {
    let norm = matrix.norm.ok_or(DataError::MissingNormalization)?;
    if matrix.units != Units::Normalized {
        return Err(DataError::NotNormalized);
    }
    let values = matrix.values.iter().map(|&v| norm.unscale(v)).collect();
    DayMatrix::new(values, matrix.dates.clone(), matrix.kind, Units::Watts, Some(norm))
}
