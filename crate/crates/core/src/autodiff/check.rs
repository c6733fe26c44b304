use super::{AutodiffError, Bindings, Graph, NodeId, ParamId, ParamStore};

/// Compares the analytic gradient of a scalar `root` with respect to `param`
/// against central finite differences with the given `step`.
///
/// Returns `max_j |analytic_j − numeric_j| / max(1, |analytic_j|)`. The
/// parameter store is left exactly as it was found, gradients included.
///
/// Panics if `step` is outside `[1e-6, 1e-3]`.
pub fn grad_check(
    graph: &mut Graph,
    root: NodeId,
    params: &mut ParamStore,
    param: ParamId,
    bindings: &Bindings,
    step: f64,
) -> Result<f64, AutodiffError> {
    assert!((1e-6..=1e-3).contains(&step), "finite-difference step {step} outside [1e-6, 1e-3]");
    let saved = params.clone();

    params.zero_grad();
    graph.forward(params, bindings)?;
    graph.backward(root, params)?;
    let analytic = params.get(param).grad.data().to_vec();

    let mut worst: f64 = 0.0;
    for (j, &a) in analytic.iter().enumerate() {
        let original = params.get(param).value.data()[j];
        params.get_mut(param).value.data_mut()[j] = original + step;
        graph.forward(params, bindings)?;
        let plus = graph.scalar(root)?;
        params.get_mut(param).value.data_mut()[j] = original - step;
        graph.forward(params, bindings)?;
        let minus = graph.scalar(root)?;
        params.get_mut(param).value.data_mut()[j] = original;

        let numeric = (plus - minus) / (2.0 * step);
        worst = worst.max((a - numeric).abs() / a.abs().max(1.0));
    }

    *params = saved;
    // leave the graph holding values for the unperturbed parameters
    graph.forward(params, bindings)?;
    Ok(worst)
}
