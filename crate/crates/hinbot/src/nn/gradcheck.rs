use super::{NnError, ParamTensor};

/// Relative error with the usual guarded denominator.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central-difference gradient check.
///
/// The caller runs its forward/backward once so that every tensor's `grad`
/// holds the analytic gradient of `loss`, then calls this with the same
/// (deterministic) loss function. Each coordinate is perturbed by `+-h` and
/// `(f(x+h) - f(x-h)) / 2h` is compared against the stored gradient.
/// Returns the maximum relative error over all coordinates of all tensors.
///
/// `params` re-borrows the tensors from `state` on every call so the loss
/// closure can own the same state.
pub fn finite_diff_check<S, P, L>(
    state: &mut S,
    mut params: P,
    mut loss: L,
    h: f64,
) -> Result<f64, NnError>
where
    P: FnMut(&mut S) -> Vec<&mut ParamTensor>,
    L: FnMut(&mut S) -> f64,
{
    if h == 0.0 || !h.is_finite() {
        return Err(NnError::InvalidStep(h));
    }
    let n_tensors = params(state).len();
    let mut max_err = 0.0f64;
    for t in 0..n_tensors {
        let len = params(state)[t].value.len();
        for i in 0..len {
            let orig = params(state)[t].value.as_slice()[i];
            params(state)[t].value.as_mut_slice()[i] = orig + h;
            let f_plus = loss(state);
            params(state)[t].value.as_mut_slice()[i] = orig - h;
            let f_minus = loss(state);
            params(state)[t].value.as_mut_slice()[i] = orig;
            let numeric = (f_plus - f_minus) / (2.0 * h);
            let analytic = params(state)[t].grad.as_slice()[i];
            max_err = max_err.max(rel_error(analytic, numeric));
        }
    }
    Ok(max_err)
}
