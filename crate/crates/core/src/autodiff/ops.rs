use super::kernels::{self, ConvDims};
use super::{AutodiffError, Tensor};

/// Dilated causal 1-D convolution outside of a graph.
///
/// Accepts `[C_in, T]` or batched `[B, C_in, T]` input with weights
/// `[C_out, C_in, K]`. The input is left-padded by `(K-1)·dilation` zeros so
/// the output keeps length `T` and `out[.., t]` only reads inputs at `t' ≤ t`.
pub fn dilated_causal_conv1d(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    dilation: usize,
) -> Result<Tensor, AutodiffError> {
    let node = "dilated_causal_conv1d".to_string();
    if dilation == 0 {
        return Err(AutodiffError::InvalidDilation { node });
    }
    let (batch, cin, time, batched) = match input.shape() {
        [c, t] => (1, *c, *t, false),
        [b, c, t] => (*b, *c, *t, true),
        other => {
            return Err(AutodiffError::ShapeMismatch {
                node,
                detail: format!("input must be [C_in, T] or [B, C_in, T], got {other:?}"),
            })
        }
    };
    let [cout, wcin, kernel] = weights.shape() else {
        return Err(AutodiffError::ShapeMismatch {
            node,
            detail: format!("weights must be [C_out, C_in, K], got {:?}", weights.shape()),
        });
    };
    if *wcin != cin {
        return Err(AutodiffError::ChannelMismatch { node, expected: *wcin, got: cin });
    }
    if *kernel == 0 || bias.shape() != [*cout] {
        return Err(AutodiffError::ShapeMismatch {
            node,
            detail: format!("kernel size {kernel}, bias {:?} for {cout} outputs", bias.shape()),
        });
    }
    let dims = ConvDims { batch, in_channels: cin, out_channels: *cout, time, kernel: *kernel, dilation };
    let out = kernels::conv1d_forward(dims, input.data(), weights.data(), bias.data());
    let shape = if batched { vec![batch, *cout, time] } else { vec![*cout, time] };
    Tensor::new(shape, out)
}

/// `mean + exp(logvar/2) ⊙ epsilon`.
pub fn reparameterize(mean: &Tensor, logvar: &Tensor, epsilon: &Tensor) -> Result<Tensor, AutodiffError> {
    if mean.shape() != logvar.shape() || mean.shape() != epsilon.shape() {
        return Err(AutodiffError::ShapeMismatch {
            node: "reparameterize".into(),
            detail: format!("mean {:?}, logvar {:?}, epsilon {:?}", mean.shape(), logvar.shape(), epsilon.shape()),
        });
    }
    let data = mean
        .data()
        .iter()
        .zip(logvar.data())
        .zip(epsilon.data())
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect();
    Tensor::new(mean.shape().to_vec(), data)
}
