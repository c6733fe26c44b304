//! Slice-level forward and backward kernels used by the graph.
//!
//! Layouts are row-major: dense inputs are `[batch, features]`, convolution
//! inputs are `[batch, channels, time]` and weights `[out, in, kernel]`.

/// Dimensions of a batched dilated causal convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvDims {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub time: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl ConvDims {
    /// Left shift applied to tap `k`: tap `k` reads `x[t - shift]`.
    #[inline]
    fn shift(&self, k: usize) -> usize {
        (self.kernel - 1 - k) * self.dilation
    }
}

pub fn conv1d_forward(d: ConvDims, x: &[f64], w: &[f64], bias: &[f64]) -> Vec<f64> {
    let t_len = d.time;
    let mut out = vec![0.0; d.batch * d.out_channels * t_len];
    for b in 0..d.batch {
        for co in 0..d.out_channels {
            let row = &mut out[(b * d.out_channels + co) * t_len..][..t_len];
            row.iter_mut().for_each(|v| *v = bias[co]);
            for ci in 0..d.in_channels {
                let xs = &x[(b * d.in_channels + ci) * t_len..][..t_len];
                let taps = &w[(co * d.in_channels + ci) * d.kernel..][..d.kernel];
                for (k, &wk) in taps.iter().enumerate() {
                    let s = d.shift(k);
                    if s >= t_len {
                        continue;
                    }
                    for (o, xv) in row[s..].iter_mut().zip(&xs[..t_len - s]) {
                        *o += wk * xv;
                    }
                }
            }
        }
    }
    out
}

/// Returns `(grad_x, grad_w, grad_bias)`.
pub fn conv1d_backward(d: ConvDims, x: &[f64], w: &[f64], grad_out: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t_len = d.time;
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; d.out_channels];
    for b in 0..d.batch {
        for co in 0..d.out_channels {
            let go = &grad_out[(b * d.out_channels + co) * t_len..][..t_len];
            gb[co] += go.iter().sum::<f64>();
            for ci in 0..d.in_channels {
                let base = (b * d.in_channels + ci) * t_len;
                let widx = (co * d.in_channels + ci) * d.kernel;
                for k in 0..d.kernel {
                    let s = d.shift(k);
                    if s >= t_len {
                        continue;
                    }
                    let wk = w[widx + k];
                    let xs = &x[base..base + t_len - s];
                    let g = &go[s..];
                    let mut acc = 0.0;
                    for (gv, xv) in g.iter().zip(xs) {
                        acc += gv * xv;
                    }
                    gw[widx + k] += acc;
                    for (gxv, gv) in gx[base..base + t_len - s].iter_mut().zip(g) {
                        *gxv += wk * gv;
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

/// `y[b] = W x[b] + bias` with `W` stored `[out, in]`.
pub fn dense_forward(batch: usize, inputs: usize, outputs: usize, x: &[f64], w: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; batch * outputs];
    for b in 0..batch {
        let xs = &x[b * inputs..][..inputs];
        for o in 0..outputs {
            let ws = &w[o * inputs..][..inputs];
            let dot: f64 = ws.iter().zip(xs).map(|(a, c)| a * c).sum();
            out[b * outputs + o] = dot + bias[o];
        }
    }
    out
}

/// Returns `(grad_x, grad_w, grad_bias)`.
pub fn dense_backward(
    batch: usize,
    inputs: usize,
    outputs: usize,
    x: &[f64],
    w: &[f64],
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; x.len()];
    let mut gw = vec![0.0; w.len()];
    let mut gb = vec![0.0; outputs];
    for b in 0..batch {
        let xs = &x[b * inputs..][..inputs];
        let gxs = &mut gx[b * inputs..][..inputs];
        for o in 0..outputs {
            let g = grad_out[b * outputs + o];
            if g == 0.0 {
                continue;
            }
            gb[o] += g;
            let ws = &w[o * inputs..][..inputs];
            let gws = &mut gw[o * inputs..][..inputs];
            for i in 0..inputs {
                gws[i] += g * xs[i];
                gxs[i] += g * ws[i];
            }
        }
    }
    (gx, gw, gb)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against `target`, from the logit.
///
/// `target·softplus(−l) + (1−target)·softplus(l)`; finite for every finite logit.
#[inline]
pub fn bce_with_logit(logit: f64, target: f64) -> f64 {
    target * softplus(-logit) + (1.0 - target) * softplus(logit)
}
