use super::MetricsError;

/// Wasserstein-1 distance between two empirical 1-D distributions.
///
/// Integrates `|F_x⁻¹(u) − F_y⁻¹(u)|` over `u ∈ [0, 1]`, walking the merged
/// quantile breakpoints `i/n` and `j/m`. Breakpoints are compared in integer
/// arithmetic so ties are exact.
pub fn wasserstein1(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricsError::Empty("Wasserstein samples"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);

    let (n, m) = (xs.len() as u128, ys.len() as u128);
    let scale = (n * m) as f64;
    let (mut i, mut j) = (0usize, 0usize);
    // quantile level reached so far, in units of 1/(n·m)
    let mut level: u128 = 0;
    let mut total = 0.0;
    while i < xs.len() && j < ys.len() {
        let next_x = (i as u128 + 1) * m;
        let next_y = (j as u128 + 1) * n;
        let next = next_x.min(next_y);
        total += (xs[i] - ys[j]).abs() * ((next - level) as f64 / scale);
        level = next;
        if next_x == next {
            i += 1;
        }
        if next_y == next {
            j += 1;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        assert!((wasserstein1(&[0.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_is_zero() {
        let x = [3.0, -1.0, 8.5, 2.0];
        assert_eq!(wasserstein1(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn translation_moves_by_shift() {
        let x = [0.3, 1.7, -2.0, 5.5, 0.0];
        let c = 2.25;
        let y: Vec<f64> = x.iter().map(|v| v + c).collect();
        assert!((wasserstein1(&x, &y).unwrap() - c).abs() < 1e-12);
    }

    #[test]
    fn unequal_sizes() {
        // {0} vs {0, 1}: half the mass moves by 1
        assert!((wasserstein1(&[0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(wasserstein1(&[], &[1.0]), Err(MetricsError::Empty("Wasserstein samples")));
    }
}
