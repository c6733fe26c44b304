//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

/// KL over `bins` equal-width bins spanning the pooled range, by direct
/// counting with floor division.
pub fn kl_oracle(p: &[f64], q: &[f64], bins: usize, eps: f64) -> f64 {
    let all: Vec<f64> = p.iter().chain(q).copied().collect();
    let mut lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let masses = |xs: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; bins];
        for &x in xs {
            let k = (((x - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
            c[k] += 1.0;
        }
        let n = xs.len() as f64;
        let norm: f64 = c.iter().map(|v| v / n + eps).sum();
        c.iter().map(|v| (v / n + eps) / norm).collect()
    };
    let (mp, mq) = (masses(p), masses(q));
    let mut total = 0.0;
    for k in 0..bins {
        total += mp[k] * (mp[k] / mq[k]).ln();
    }
    total
}

/// Biased RBF MMD by explicit double loops.
pub fn mmd_oracle(x: &[Vec<f64>], y: &[Vec<f64>], sigma: f64) -> f64 {
    let k = |a: &[f64], b: &[f64]| {
        let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
        (-d2 / (2.0 * sigma * sigma)).exp()
    };
    let mean = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        let mut s = 0.0;
        for u in a {
            for v in b {
                s += k(u, v);
            }
        }
        s / (a.len() * b.len()) as f64
    };
    (mean(x, x) - 2.0 * mean(x, y) + mean(y, y)).max(0.0).sqrt()
}

/// Minimum mean |x_i − y_π(i)| over every bijection π (equal sizes only).
pub fn w1_matching_oracle(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    fn go(x: &[f64], y: &[f64], used: &mut Vec<bool>, i: usize, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if i == x.len() {
            *best = acc;
            return;
        }
        for j in 0..y.len() {
            if !used[j] {
                used[j] = true;
                go(x, y, used, i + 1, acc + (x[i] - y[j]).abs(), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(x, y, &mut vec![false; y.len()], 0, 0.0, &mut best);
    best / x.len() as f64
}

/// `∫ |F_x(t) − F_y(t)| dt` with empirical CDFs, integrated exactly between
/// consecutive pooled sample points.
pub fn w1_cdf_oracle(x: &[f64], y: &[f64]) -> f64 {
    let mut pts: Vec<f64> = x.iter().chain(y).copied().collect();
    pts.sort_by(f64::total_cmp);
    let cdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
    pts.windows(2).map(|w| (cdf(x, w[0]) - cdf(y, w[0])).abs() * (w[1] - w[0])).sum()
}

/// Percentile by linear interpolation, computed with its own sort.
pub fn percentile_oracle(values: &[f64], p: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p / 100.0 * (s.len() as f64 - 1.0);
    let i = pos as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    s[i] + (pos - i as f64) * (s[i + 1] - s[i])
}

/// Five-tuple `(p_peak, p_base, high_hours, rise_hours, fall_hours)` by a
/// plain scan of the day.
#[allow(clippy::needless_range_loop)]
pub fn shape_oracle(day: &[f64], ah: f64, al: f64) -> (f64, f64, f64, f64, f64) {
    let peak = percentile_oracle(day, 97.5);
    let base = percentile_oracle(day, 2.5);
    if peak <= base {
        return (peak, base, 0.0, 0.0, 0.0);
    }
    let high = base + ah * (peak - base);
    let low = base + al * (peak - base);
    let mut count = 0;
    let mut first_high = None;
    let mut last_high = None;
    for (i, &v) in day.iter().enumerate() {
        if v >= high {
            count += 1;
            first_high.get_or_insert(i);
            last_high = Some(i);
        }
    }
    let mut rise = 0.0;
    if let Some(h) = first_high {
        let mut j = h;
        while j > 0 {
            j -= 1;
            if day[j] <= low {
                rise = (h - j) as f64 * 0.25;
                break;
            }
        }
    }
    let mut fall = 0.0;
    if let Some(h) = last_high {
        for j in h + 1..day.len() {
            if day[j] <= low {
                fall = (j - h) as f64 * 0.25;
                break;
            }
        }
    }
    (peak, base, count as f64 * 0.25, rise, fall)
}

/// Mean and population std by two passes.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// 0 for 32 slots, ramp up over 8, plateau of 40 at 100, ramp down over 8,
/// 0 for the last 8.
pub fn trapezoid_day() -> Vec<f64> {
    let mut d = vec![0.0; 32];
    d.extend((0..8).map(|i| 100.0 * (i + 1) as f64 / 8.0));
    d.extend(std::iter::repeat_n(100.0, 40));
    d.extend((0..8).map(|i| 100.0 * (7 - i) as f64 / 8.0));
    d.extend(std::iter::repeat_n(0.0, 8));
    assert_eq!(d.len(), 96);
    d
}

/// One slot at 100, the rest 0.
pub fn spike_day() -> Vec<f64> {
    let mut d = vec![0.0; 96];
    d[40] = 100.0;
    d
}

pub mod grad_cases;
