use super::MetricsError;

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sum of `exp(-γ‖a_i − b_j‖²)` over all pairs.
fn cross_sum(a: &[f64], b: &[f64], dim: usize, gamma: f64) -> f64 {
    let mut total = 0.0;
    for u in a.chunks_exact(dim) {
        for v in b.chunks_exact(dim) {
            total += (-gamma * sq_dist(u, v)).exp();
        }
    }
    total
}

/// Sum over all ordered pairs of one set, diagonal included.
fn self_sum(a: &[f64], dim: usize, gamma: f64) -> f64 {
    let rows: Vec<&[f64]> = a.chunks_exact(dim).collect();
    let mut off = 0.0;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            off += (-gamma * sq_dist(rows[i], rows[j])).exp();
        }
    }
    rows.len() as f64 + 2.0 * off
}

/// Biased (V-statistic) RBF maximum mean discrepancy between two sample sets
/// of `dim`-dimensional points stored row-major.
///
/// Returns `sqrt(max(0, MMD²))` with kernel `exp(−‖x−y‖² / 2σ²)`.
pub fn mmd_rbf(x: &[f64], y: &[f64], dim: usize, sigma: f64) -> Result<f64, MetricsError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(MetricsError::NonPositiveSigma(sigma));
    }
    if dim == 0 || !x.len().is_multiple_of(dim) || !y.len().is_multiple_of(dim) {
        return Err(MetricsError::DimensionMismatch);
    }
    if x.is_empty() || y.is_empty() {
        return Err(MetricsError::Empty("MMD samples"));
    }
    let (n, m) = ((x.len() / dim) as f64, (y.len() / dim) as f64);
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let kxx = self_sum(x, dim, gamma) / (n * n);
    let kyy = self_sum(y, dim, gamma) / (m * m);
    let kxy = cross_sum(x, y, dim, gamma) / (n * m);
    Ok((kxx - 2.0 * kxy + kyy).max(0.0).sqrt())
}

/// Median pairwise Euclidean distance of the pooled rows of `x` and `y`.
///
/// When the pool exceeds `cap` rows, an evenly strided subset of `cap` rows
/// is used. Falls back to 1.0 when every distance is zero.
pub fn median_heuristic(x: &[f64], y: &[f64], dim: usize, cap: usize) -> Result<f64, MetricsError> {
    if dim == 0 || !x.len().is_multiple_of(dim) || !y.len().is_multiple_of(dim) {
        return Err(MetricsError::DimensionMismatch);
    }
    let pool: Vec<&[f64]> = x.chunks_exact(dim).chain(y.chunks_exact(dim)).collect();
    if pool.len() < 2 {
        return Ok(1.0);
    }
    let picked: Vec<&[f64]> = if pool.len() > cap.max(2) {
        let cap = cap.max(2);
        (0..cap).map(|i| pool[i * pool.len() / cap]).collect()
    } else {
        pool
    };
    let mut dists = Vec::with_capacity(picked.len() * (picked.len() - 1) / 2);
    for i in 0..picked.len() {
        for j in i + 1..picked.len() {
            dists.push(sq_dist(picked[i], picked[j]).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let k = dists.len();
    let median = if k % 2 == 1 { dists[k / 2] } else { 0.5 * (dists[k / 2 - 1] + dists[k / 2]) };
    Ok(if median > 0.0 { median } else { 1.0 })
}
