use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Hours covered by one 15-minute sample.
pub const SLOT_HOURS: f64 = 0.25;

/// Five load-shape parameters of a single day.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DayShape {
    /// 97.5th percentile of the day's readings.
    pub p_peak: f64,
    /// 2.5th percentile of the day's readings.
    pub p_base: f64,
    /// Hours spent at or above the high-load threshold.
    pub high_load_duration: f64,
    /// Hours from the last low sample to the first high sample.
    pub rise_time: f64,
    /// Hours from the last high sample to the next low sample.
    pub fall_time: f64,
}

/// Percentile `p ∈ [0, 100]` of sorted data, interpolating linearly between
/// order statistics at rank `p/100 · (n − 1)`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Computes the five load-shape parameters of one day of readings.
///
/// The high and low thresholds sit at `alpha_high` and `alpha_low` of the way
/// from `p_base` to `p_peak`. A day with `p_peak == p_base` has no shape and
/// all durations are zero.
pub fn load_shape(day: &[f64], alpha_high: f64, alpha_low: f64) -> Result<DayShape, MetricsError> {
    if day.is_empty() {
        return Err(MetricsError::Empty("day"));
    }
    if day.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    if !(0.0 < alpha_low && alpha_low < alpha_high && alpha_high <= 1.0) {
        return Err(MetricsError::BadAlphas { alpha_high, alpha_low });
    }
    let mut sorted = day.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p_peak = percentile(&sorted, 97.5);
    let p_base = percentile(&sorted, 2.5);
    if p_peak <= p_base {
        return Ok(DayShape { p_peak, p_base, high_load_duration: 0.0, rise_time: 0.0, fall_time: 0.0 });
    }
    let span = p_peak - p_base;
    let high = p_base + alpha_high * span;
    let low = p_base + alpha_low * span;

    let high_count = day.iter().filter(|&&v| v >= high).count();
    let first_high = day.iter().position(|&v| v >= high);
    let last_high = day.iter().rposition(|&v| v >= high);

    let rise_time = first_high
        .and_then(|h| day[..h].iter().rposition(|&v| v <= low).map(|l| h - l))
        .map_or(0.0, |slots| slots as f64 * SLOT_HOURS);
    let fall_time = last_high
        .and_then(|h| day[h + 1..].iter().position(|&v| v <= low).map(|l| l + 1))
        .map_or(0.0, |slots| slots as f64 * SLOT_HOURS);

    Ok(DayShape { p_peak, p_base, high_load_duration: high_count as f64 * SLOT_HOURS, rise_time, fall_time })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Mean and population standard deviation of each load-shape parameter
/// across days.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadShapeStats {
    pub p_base: Summary,
    pub p_peak: Summary,
    pub high_load_duration: Summary,
    pub rise_time: Summary,
    pub fall_time: Summary,
}

impl LoadShapeStats {
    /// `(name, summary)` in table column order.
    pub fn fields(&self) -> [(&'static str, Summary); 5] {
        [
            ("p_base", self.p_base),
            ("p_peak", self.p_peak),
            ("high_load_duration", self.high_load_duration),
            ("rise_time", self.rise_time),
            ("fall_time", self.fall_time),
        ]
    }
}

/// Welford accumulator.
#[derive(Default)]
struct Running {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn summary(&self) -> Summary {
        Summary { mean: self.mean, std: (self.m2 / self.n).max(0.0).sqrt() }
    }
}

/// Aggregates [`load_shape`] over every row of `days` (row-major, `day_len`
/// readings per row).
pub fn aggregate_stats(
    days: &[f64],
    day_len: usize,
    alpha_high: f64,
    alpha_low: f64,
) -> Result<LoadShapeStats, MetricsError> {
    if days.is_empty() || day_len == 0 {
        return Err(MetricsError::Empty("day matrix"));
    }
    if !days.len().is_multiple_of(day_len) {
        return Err(MetricsError::DimensionMismatch);
    }
    let mut acc: [Running; 5] = Default::default();
    for day in days.chunks_exact(day_len) {
        let s = load_shape(day, alpha_high, alpha_low)?;
        for (a, v) in acc.iter_mut().zip([s.p_base, s.p_peak, s.high_load_duration, s.rise_time, s.fall_time]) {
            a.push(v);
        }
    }
    Ok(LoadShapeStats {
        p_base: acc[0].summary(),
        p_peak: acc[1].summary(),
        high_load_duration: acc[2].summary(),
        rise_time: acc[3].summary(),
        fall_time: acc[4].summary(),
    })
}
