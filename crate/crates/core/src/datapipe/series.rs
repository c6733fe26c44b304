use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};

use super::DataError;

/// Regularly sampled power readings in watts.
///
/// A `None` value marks a gap: a sampling slot with no usable reading.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<DateTime<Utc>>,
    values: Vec<Option<f64>>,
    period_minutes: u32,
}

/// Which CSV columns to read and, optionally, the sampling period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSpec {
    pub timestamp: String,
    pub value: String,
    /// Sampling period in minutes; inferred from the smallest gap when `None`.
    pub period_minutes: Option<u32>,
}

impl ColumnSpec {
    pub fn new(value: impl Into<String>) -> Self {
        Self { timestamp: "timestamp".into(), value: value.into(), period_minutes: None }
    }
}

impl TimeSeries {
    /// Builds a series, checking ordering and grid alignment.
    pub fn new(
        timestamps: Vec<DateTime<Utc>>,
        values: Vec<Option<f64>>,
        period_minutes: u32,
    ) -> Result<Self, DataError> {
        assert_eq!(timestamps.len(), values.len(), "one value per timestamp");
        if period_minutes == 0 {
            return Err(DataError::InvalidPeriod(0));
        }
        let period = i64::from(period_minutes) * 60;
        for pair in timestamps.windows(2) {
            let gap = (pair[1] - pair[0]).num_seconds();
            if gap <= 0 {
                return Err(DataError::NonMonotonic { timestamp: pair[1].to_rfc3339() });
            }
            if gap % period != 0 {
                return Err(DataError::OffGrid { timestamp: pair[1].to_rfc3339(), period_minutes });
            }
        }
        for (t, v) in timestamps.iter().zip(&values) {
            if let Some(v) = v {
                if !v.is_finite() || *v < 0.0 {
                    return Err(DataError::InvalidReading { timestamp: t.to_rfc3339(), value: *v });
                }
            }
        }
        Ok(Self { timestamps, values, period_minutes })
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn period_minutes(&self) -> u32 {
        self.period_minutes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }
}

/// Parses an ISO-8601 timestamp. Values without an offset are taken as UTC.
pub fn parse_timestamp(text: &str) -> Option<DateTime<Utc>> {
    let text = text.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Some(t.with_timezone(&Utc));
    }
    const NAIVE: [&str; 4] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
    NAIVE.iter().find_map(|fmt| NaiveDateTime::parse_from_str(text, fmt).ok()).map(|t| t.and_utc())
}

/// Reads a timestamp/value CSV into a series sorted by time.
///
/// Rows whose value cell is empty are treated as missing samples. Rows may
/// appear in any order; duplicate timestamps are rejected.
pub fn load_csv(path: &Path, spec: &ColumnSpec) -> Result<TimeSeries, DataError> {
    let mut reader =
        csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| DataError::io(path, e))?;
    let headers = reader.headers().map_err(|e| DataError::io(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn { path: path.display().to_string(), column: name.to_string() })
    };
    let ts_col = column(&spec.timestamp)?;
    let val_col = column(&spec.value)?;

    // (timestamp, value, line)
    let mut rows: Vec<(DateTime<Utc>, f64, u64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::io(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_ts = record.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(raw_ts)
            .ok_or_else(|| DataError::Parse { line, detail: format!("bad timestamp {raw_ts:?}") })?;
        let raw_val = record.get(val_col).unwrap_or("");
        if raw_val.is_empty() {
            continue;
        }
        let value: f64 = raw_val.parse().map_err(|_| DataError::Parse {
            line,
            detail: format!("bad value {raw_val:?} in column {}", spec.value),
        })?;
        if !value.is_finite() || value < 0.0 {
            return Err(DataError::Parse {
                line,
                detail: format!("power reading {value} must be finite and non-negative"),
            });
        }
        rows.push((ts, value, line));
    }
    if rows.is_empty() {
        return Err(DataError::Empty { path: path.display().to_string() });
    }
    rows.sort_by_key(|r| r.0);
    if let Some(pair) = rows.windows(2).find(|p| p[0].0 == p[1].0) {
        return Err(DataError::DuplicateTimestamp {
            line: pair[0].2.max(pair[1].2),
            timestamp: pair[1].0.to_rfc3339(),
        });
    }

    let period = match spec.period_minutes {
        Some(p) => p,
        None => infer_period(&rows)?,
    };
    let (timestamps, values) = rows.into_iter().map(|(t, v, _)| (t, Some(v))).unzip();
    TimeSeries::new(timestamps, values, period)
}

fn infer_period(rows: &[(DateTime<Utc>, f64, u64)]) -> Result<u32, DataError> {
    let smallest =
        rows.windows(2).map(|p| (p[1].0 - p[0].0).num_seconds()).min().ok_or(DataError::CannotInferPeriod)?;
    if smallest % 60 != 0 {
        return Err(DataError::CannotInferPeriod);
    }
    u32::try_from(smallest / 60).map_err(|_| DataError::CannotInferPeriod)
}

/// Averages a series onto a coarser grid of `target_minutes`.
///
/// Windows are aligned to multiples of the target period since the Unix
/// epoch. A window yields the mean of its samples only when every source slot
/// in it holds a reading; otherwise it yields a gap. The output covers every
/// window from the first to the last sample.
pub fn resample(series: &TimeSeries, target_minutes: u32) -> Result<TimeSeries, DataError> {
    let source = series.period_minutes;
    if target_minutes == 0 || !target_minutes.is_multiple_of(source) {
        return Err(DataError::PeriodNotMultiple { source_minutes: source, target_minutes });
    }
    let slots = (target_minutes / source) as usize;
    let width = i64::from(target_minutes) * 60;
    let window_of = |t: &DateTime<Utc>| t.timestamp().div_euclid(width);

    let (Some(first), Some(last)) = (series.timestamps.first(), series.timestamps.last()) else {
        return TimeSeries::new(Vec::new(), Vec::new(), target_minutes);
    };
    let (w0, w1) = (window_of(first), window_of(last));
    let n_windows = (w1 - w0 + 1) as usize;
    let mut sums = vec![0.0; n_windows];
    let mut counts = vec![0usize; n_windows];
    for (t, v) in series.timestamps.iter().zip(&series.values) {
        if let Some(v) = v {
            let w = (window_of(t) - w0) as usize;
            sums[w] += v;
            counts[w] += 1;
        }
    }
    let timestamps =
        (0..n_windows as i64).map(|w| DateTime::from_timestamp((w0 + w) * width, 0).expect("in range")).collect();
    let values = sums.iter().zip(&counts).map(|(s, &c)| (c == slots).then(|| s / c as f64)).collect();
    TimeSeries::new(timestamps, values, target_minutes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ts(text: &str) -> DateTime<Utc> {
        parse_timestamp(text).unwrap()
    }

    fn write_csv(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    fn five_minute(values: &[Option<f64>], start: &str) -> TimeSeries {
        let t0 = ts(start);
        let times = (0..values.len()).map(|i| t0 + chrono::Duration::minutes(5 * i as i64)).collect();
        TimeSeries::new(times, values.to_vec(), 5).unwrap()
    }

    #[test]
    fn parses_common_timestamp_forms() {
        let a = ts("2020-05-01T10:15:00Z");
        assert_eq!(ts("2020-05-01 10:15:00"), a);
        assert_eq!(ts("2020-05-01T12:15:00+02:00"), a);
        assert_eq!(ts("2020-05-01T10:15"), a);
        assert!(parse_timestamp("yesterday").is_none());
    }

    #[test]
    fn two_rows() {
        let f = write_csv("timestamp,load\n2020-01-01T00:00:00Z,10\n2020-01-01T00:05:00Z,20\n");
        let s = load_csv(f.path(), &ColumnSpec::new("load")).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.period_minutes(), 5);
        assert_eq!(s.values(), &[Some(10.0), Some(20.0)]);
    }

    #[test]
    fn bad_value_names_line() {
        let f = write_csv("timestamp,load\n2020-01-01T00:00:00Z,10\n2020-01-01T00:05:00Z,abc\n");
        match load_csv(f.path(), &ColumnSpec::new("load")) {
            Err(DataError::Parse { line, detail }) => {
                assert_eq!(line, 3);
                assert!(detail.contains("abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_order_rows_are_sorted() {
        let f = write_csv("timestamp,load\n2020-01-01T00:10:00Z,3\n2020-01-01T00:00:00Z,1\n2020-01-01T00:05:00Z,2\n");
        let s = load_csv(f.path(), &ColumnSpec::new("load")).unwrap();
        assert_eq!(s.values(), &[Some(1.0), Some(2.0), Some(3.0)]);
        assert!(s.timestamps().windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn duplicates_and_missing_columns_rejected() {
        let f = write_csv("timestamp,load\n2020-01-01T00:00:00Z,1\n2020-01-01T00:00:00Z,2\n");
        assert!(matches!(
            load_csv(f.path(), &ColumnSpec::new("load")),
            Err(DataError::DuplicateTimestamp { line: 3, .. })
        ));
        assert!(matches!(load_csv(f.path(), &ColumnSpec::new("pv")), Err(DataError::MissingColumn { .. })));
    }

    #[test]
    fn off_grid_and_negative_rejected() {
        let f = write_csv("timestamp,load\n2020-01-01T00:00:00Z,1\n2020-01-01T00:05:00Z,2\n2020-01-01T00:12:00Z,2\n");
        assert!(matches!(load_csv(f.path(), &ColumnSpec::new("load")), Err(DataError::OffGrid { .. })));
        let f = write_csv("timestamp,load\n2020-01-01T00:00:00Z,-1\n");
        assert!(matches!(load_csv(f.path(), &ColumnSpec::new("load")), Err(DataError::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_cells_are_missing_samples() {
        let f = write_csv("timestamp,load\n2020-01-01T00:00:00Z,1\n2020-01-01T00:05:00Z,\n2020-01-01T00:10:00Z,3\n");
        let s = load_csv(f.path(), &ColumnSpec::new("load")).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn resample_means_full_windows() {
        let s = five_minute(&[Some(10.0), Some(20.0), Some(30.0)], "2020-01-01T00:00:00Z");
        let r = resample(&s, 15).unwrap();
        assert_eq!(r.values(), &[Some(20.0)]);
        assert_eq!(r.period_minutes(), 15);
    }

    #[test]
    fn resample_constant_stays_constant() {
        let s = five_minute(&[Some(0.1); 12], "2020-01-01T00:00:00Z");
        let r = resample(&s, 15).unwrap();
        assert_eq!(r.len(), 4);
        let first = r.values()[0].unwrap();
        assert!((first - 0.1).abs() < 1e-12);
        assert!(r.values().iter().all(|v| *v == Some(first)));
    }

    #[test]
    fn resample_marks_incomplete_windows() {
        // second sample of the first window is absent from the series entirely
        let t0 = ts("2020-01-01T00:00:00Z");
        let times = vec![
            t0,
            t0 + chrono::Duration::minutes(10),
            t0 + chrono::Duration::minutes(15),
            t0 + chrono::Duration::minutes(20),
            t0 + chrono::Duration::minutes(25),
        ];
        let s = TimeSeries::new(times, vec![Some(1.0); 5], 5).unwrap();
        let r = resample(&s, 15).unwrap();
        assert_eq!(r.values(), &[None, Some(1.0)]);

        let with_gap = five_minute(&[Some(1.0), None, Some(3.0)], "2020-01-01T00:00:00Z");
        assert_eq!(resample(&with_gap, 15).unwrap().values(), &[None]);
    }

    #[test]
    fn resample_rejects_non_multiple() {
        let s = five_minute(&[Some(1.0); 3], "2020-01-01T00:00:00Z");
        assert!(matches!(resample(&s, 12), Err(DataError::PeriodNotMultiple { .. })));
    }
}
