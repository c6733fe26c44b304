use crate::autodiff::Param;

/// One bias-corrected Adam update from `param.grad`, moments updated in place.
pub fn adam_step(param: &mut Param, lr: f64, beta1: f64, beta2: f64, eps: f64) {
    param.step += 1;
    let t = param.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let grad = param.grad.data();
    let m = param.moment1.data_mut();
    for (m, g) in m.iter_mut().zip(grad) {
        *m = beta1 * *m + (1.0 - beta1) * g;
    }
    let v = param.moment2.data_mut();
    for (v, g) in v.iter_mut().zip(grad) {
        *v = beta2 * *v + (1.0 - beta2) * g * g;
    }
    let (m, v) = (param.moment1.data(), param.moment2.data());
    for ((w, m), v) in param.value.data_mut().iter_mut().zip(m).zip(v) {
        *w -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    }
}
