use super::{Matrix, NnError};

/// A trainable tensor: value plus gradient and AdamW moment buffers.
///
/// All four matrices share one shape. The gradient is accumulated by the
/// backward passes and zeroed by the caller between optimizer steps.
#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub moment1: Matrix,
    pub moment2: Matrix,
    pub step_count: u64,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let (r, c) = (value.rows(), value.cols());
        ParamTensor {
            name: name.into(),
            value,
            grad: Matrix::zeros(r, c),
            moment1: Matrix::zeros(r, c),
            moment2: Matrix::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// One AdamW update over a set of parameters.
///
/// Decoupled weight decay is applied first (`theta -= lr * wd * theta`),
/// then the bias-corrected moment update. Gradients are left untouched so
/// the caller controls when to zero them.
pub fn adamw_step<'a, I>(
    params: I,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
    weight_decay: f64,
) -> Result<(), NnError>
where
    I: IntoIterator<Item = &'a mut ParamTensor>,
{
    let (beta1, beta2) = betas;
    for p in params {
        if !p.grad.is_finite() {
            return Err(NnError::NonFiniteGrad {
                param: p.name.clone(),
            });
        }
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let n = p.value.len();
        for i in 0..n {
            let g = p.grad.as_slice()[i];
            let mut theta = p.value.as_slice()[i];
            theta -= lr * weight_decay * theta;
            let m = beta1 * p.moment1.as_slice()[i] + (1.0 - beta1) * g;
            let v = beta2 * p.moment2.as_slice()[i] + (1.0 - beta2) * g * g;
            p.moment1.as_mut_slice()[i] = m;
            p.moment2.as_mut_slice()[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            theta -= lr * m_hat / (v_hat.sqrt() + eps);
            p.value.as_mut_slice()[i] = theta;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BETAS: (f64, f64) = (0.9, 0.999);
    const EPS: f64 = 1e-8;

    fn scalar_param(v: f64, g: f64) -> ParamTensor {
        let mut p = ParamTensor::new("theta", Matrix::from_vec(1, 1, vec![v]).unwrap());
        p.grad.set(0, 0, g);
        p
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let mut p = scalar_param(1.5, 0.0);
        adamw_step(std::iter::once(&mut p), 1e-3, BETAS, EPS, 0.0).unwrap();
        assert_eq!(p.value.get(0, 0), 1.5);
        assert_eq!(p.step_count, 1);
    }

    #[test]
    fn first_step_closed_form() {
        // theta = 1, g = 1, lr = 1e-3, wd = 0: bias correction makes
        // m_hat = v_hat = 1, so theta' = 1 - lr / (1 + eps).
        let mut p = scalar_param(1.0, 1.0);
        adamw_step(std::iter::once(&mut p), 1e-3, BETAS, EPS, 0.0).unwrap();
        let expected = 1.0 - 1e-3 / (1.0 + EPS);
        assert!((p.value.get(0, 0) - expected).abs() < 1e-15);
        assert!((p.value.get(0, 0) - (1.0 - 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn pure_decoupled_decay() {
        // g = 0, wd = 0.1, lr = 0.1, theta = 1 -> 0.99; the moment update
        // contributes nothing since m stays zero.
        let mut p = scalar_param(1.0, 0.0);
        adamw_step(std::iter::once(&mut p), 0.1, BETAS, EPS, 0.1).unwrap();
        assert!((p.value.get(0, 0) - 0.99).abs() < 1e-15);
    }

    #[test]
    fn lr_zero_leaves_values_bit_identical() {
        let mut p = scalar_param(0.123456789, 42.0);
        let before = p.value.get(0, 0).to_bits();
        adamw_step(std::iter::once(&mut p), 0.0, BETAS, EPS, 0.3).unwrap();
        assert_eq!(p.value.get(0, 0).to_bits(), before);
    }

    #[test]
    fn non_finite_grad_names_parameter() {
        let mut p = ParamTensor::new("layer0.w_q", Matrix::zeros(1, 1));
        p.grad.set(0, 0, f64::NAN);
        let err = adamw_step(std::iter::once(&mut p), 1e-3, BETAS, EPS, 0.0).unwrap_err();
        assert!(err.to_string().contains("layer0.w_q"), "{err}");
    }

    #[test]
    fn grads_left_untouched() {
        let mut p = scalar_param(1.0, 2.0);
        adamw_step(std::iter::once(&mut p), 1e-3, BETAS, EPS, 0.0).unwrap();
        assert_eq!(p.grad.get(0, 0), 2.0);
    }
}
