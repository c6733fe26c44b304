use super::MetricsError;

/// Normalized histogram over fixed bin edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    masses: Vec<f64>,
    smoothing_eps: f64,
}

impl Histogram {
    /// Bins `samples` over `edges` (B+1 ascending values). Samples outside the
    /// edges are clamped into the end bins. Each bin mass then receives
    /// `smoothing_eps` and the masses are renormalized to sum to one.
    pub fn from_samples(samples: &[f64], edges: &[f64], smoothing_eps: f64) -> Result<Self, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::Empty("histogram samples"));
        }
        if edges.len() < 2 || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MetricsError::BadEdges);
        }
        let bins = edges.len() - 1;
        let (lo, hi) = (edges[0], edges[bins]);
        let mut counts = vec![0usize; bins];
        for &v in samples {
            let idx = if v <= lo {
                0
            } else if v >= hi {
                bins - 1
            } else {
                // first edge strictly greater than v, minus one
                edges.partition_point(|&e| e <= v) - 1
            };
            counts[idx] += 1;
        }
        let n = samples.len() as f64;
        let total = 1.0 + bins as f64 * smoothing_eps;
        let masses = counts.iter().map(|&c| (c as f64 / n + smoothing_eps) / total).collect();
        Ok(Self { edges: edges.to_vec(), masses, smoothing_eps })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn smoothing_eps(&self) -> f64 {
        self.smoothing_eps
    }
}

/// `bins + 1` evenly spaced edges spanning the union range of both sample
/// sets. A degenerate range is widened by half a unit on each side.
pub fn shared_edges(a: &[f64], b: &[f64], bins: usize) -> Result<Vec<f64>, MetricsError> {
    if bins == 0 {
        return Err(MetricsError::ZeroBins);
    }
    let (mut lo, mut hi) =
        a.iter().chain(b).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(MetricsError::Empty("samples"));
    }
    if hi <= lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    Ok(edges)
}

/// `Σ p_i ln(p_i / q_i)`; terms with `p_i == 0` contribute nothing.
pub fn kl_from_masses(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "mass vectors differ in length");
    p.iter().zip(q).filter(|(p, _)| **p > 0.0).map(|(p, q)| p * (p / q).ln()).sum()
}

/// KL divergence of the synthetic marginal from the real one, with the
/// histograms it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct KlOutcome {
    pub value: f64,
    pub real: Histogram,
    pub synth: Histogram,
}

/// `D_KL(real || synth)` between histograms of the two sample sets on shared
/// edges, natural log.
pub fn kl_divergence(real: &[f64], synth: &[f64], bins: usize, smoothing_eps: f64) -> Result<KlOutcome, MetricsError> {
    if real.is_empty() {
        return Err(MetricsError::Empty("real samples"));
    }
    if synth.is_empty() {
        return Err(MetricsError::Empty("synthetic samples"));
    }
    let edges = shared_edges(real, synth, bins)?;
    let real = Histogram::from_samples(real, &edges, smoothing_eps)?;
    let synth = Histogram::from_samples(synth, &edges, smoothing_eps)?;
    let value = kl_from_masses(real.masses(), synth.masses());
    Ok(KlOutcome { value, real, synth })
}
