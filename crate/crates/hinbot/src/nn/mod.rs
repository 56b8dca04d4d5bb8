//! Minimal differentiable numeric core: dense matrices, activations,
//! parameter tensors with AdamW updates, and a finite-difference gradient
//! oracle. Everything downstream builds on the gradient contract verified
//! here.

mod gradcheck;
mod matrix;
mod ops;
mod param;
mod rng;

pub use gradcheck::{finite_diff_check, rel_error};
pub use matrix::Matrix;
pub use ops::{
    leaky_relu, leaky_relu_f, leaky_relu_prime, linear, linear_backward, sigmoid, sigmoid_f,
    softmax, softmax_in_place, tanh, LEAKY_RELU_SLOPE,
};
pub use param::{adamw_step, ParamTensor};
pub use rng::Rng;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: non-finite value in input")]
    NonFinite { op: &'static str },
    #[error("{op}: shape mismatch (expected {expected}, got {got})")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGrad { param: String },
    #[error("finite-difference step must be finite and nonzero, got {0}")]
    InvalidStep(f64),
    #[error("softmax input must be non-empty")]
    EmptyInput,
}
