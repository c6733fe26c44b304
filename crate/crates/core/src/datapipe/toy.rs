//! Synthetic sinusoid day profiles for smoke tests and toy training runs.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DayMatrix, SeriesKind, Units, DAY_LEN};

/// `n_days` profiles in watts: a daily sinusoid with a small per-day
/// amplitude jitter plus Gaussian reading noise.
pub fn sinusoid_days(n_days: usize, seed: u64) -> DayMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 15.0).expect("valid std");
    let tau = std::f64::consts::TAU;
    let mut values = Vec::with_capacity(n_days * DAY_LEN);
    for _ in 0..n_days {
        let amplitude = rng.random_range(0.9..1.1);
        for t in 0..DAY_LEN {
            let x = t as f64 / DAY_LEN as f64;
            let shape = 0.55 + 0.3 * amplitude * (tau * x).sin();
            let watts = 1000.0 * shape + noise.sample(&mut rng);
            values.push(watts.max(0.0));
        }
    }
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date");
    let dates = start.iter_days().take(n_days).collect();
    DayMatrix::new(values, dates, SeriesKind::Load, Units::Watts, None).expect("well-formed")
}
