use super::{Matrix, NnError, ParamTensor};

/// Negative slope of leaky-relu. The value is a fixed implementation
/// constant; every activation site in the model uses it.
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

#[inline]
pub fn leaky_relu_f(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_RELU_SLOPE * x
    }
}

/// Derivative of leaky-relu; 1 on the closed nonnegative branch.
#[inline]
pub fn leaky_relu_prime(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        LEAKY_RELU_SLOPE
    }
}

pub fn leaky_relu(x: &Matrix) -> Result<Matrix, NnError> {
    if !x.is_finite() {
        return Err(NnError::NonFinite { op: "leaky_relu" });
    }
    Ok(x.map(leaky_relu_f))
}

#[inline]
pub fn sigmoid_f(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn sigmoid(x: &Matrix) -> Result<Matrix, NnError> {
    if !x.is_finite() {
        return Err(NnError::NonFinite { op: "sigmoid" });
    }
    Ok(x.map(sigmoid_f))
}

pub fn tanh(x: &Matrix) -> Result<Matrix, NnError> {
    if !x.is_finite() {
        return Err(NnError::NonFinite { op: "tanh" });
    }
    Ok(x.map(f64::tanh))
}

/// In-place softmax with max-subtraction. The shift cancels exactly, so
/// this is mathematically the plain softmax but stable for large inputs.
pub fn softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

pub fn softmax(xs: &[f64]) -> Result<Vec<f64>, NnError> {
    if xs.is_empty() {
        return Err(NnError::EmptyInput);
    }
    if !xs.iter().all(|v| v.is_finite()) {
        return Err(NnError::NonFinite { op: "softmax" });
    }
    let mut out = xs.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// Affine map per node row: `out[i] = W x[i] + b`.
///
/// `w` has shape (out_dim x in_dim), `b` (out_dim x 1), `x` (nodes x in_dim).
pub fn linear(w: &ParamTensor, b: &ParamTensor, x: &Matrix) -> Result<Matrix, NnError> {
    if w.value.cols() != x.cols() {
        return Err(NnError::ShapeMismatch {
            op: "linear",
            expected: format!("input width {}", w.value.cols()),
            got: x.shape_string(),
        });
    }
    if b.value.rows() != w.value.rows() || b.value.cols() != 1 {
        return Err(NnError::ShapeMismatch {
            op: "linear",
            expected: format!("bias {}x1", w.value.rows()),
            got: b.value.shape_string(),
        });
    }
    let mut out = x.matmul_nt(&w.value);
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        for (c, v) in row.iter_mut().enumerate() {
            *v += b.value.get(c, 0);
        }
    }
    Ok(out)
}

/// Backward companion of [`linear`]: accumulates `w.grad` and `b.grad`
/// from `grad_out` and returns the gradient with respect to `x`.
pub fn linear_backward(
    w: &mut ParamTensor,
    b: &mut ParamTensor,
    x: &Matrix,
    grad_out: &Matrix,
) -> Matrix {
    assert_eq!(grad_out.rows(), x.rows(), "linear_backward row count");
    assert_eq!(grad_out.cols(), w.value.rows(), "linear_backward width");
    grad_out.matmul_tn_acc(x, &mut w.grad);
    for r in 0..grad_out.rows() {
        for c in 0..grad_out.cols() {
            let g = b.grad.get(c, 0) + grad_out.get(r, c);
            b.grad.set(c, 0, g);
        }
    }
    grad_out.matmul(&w.value)
}
