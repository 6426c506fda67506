//! Dense row-major tensors, a recording tape for reverse-mode
//! differentiation, and the handful of layers, losses and optimizers the
//! training pipeline needs.
//!
//! Everything is generic over [`Real`] so that the exact same kernels can be
//! run in `f32` for training and in `f64` when checking gradients against
//! finite differences.

pub mod gradcheck;
pub mod init;
pub mod io;
pub mod kernels;
pub mod optim;
pub mod param;
pub mod real;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, max_relative_error, numeric_gradient};
pub use optim::{adam_step, exp_decay_lr, Adam};
pub use param::{ParamId, ParamStore, Parameter};
pub use real::Real;
pub use rng::Rng;
pub use kernels::Segment;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("index {index} out of range for size {size}")]
    OutOfRange { index: usize, size: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("malformed tensor file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// `std::io::Error` is not `PartialEq`; keep its kind and message.
#[derive(Debug, Error, PartialEq)]
#[error("{kind:?}: {message}")]
pub struct IoError {
    pub kind: std::io::ErrorKind,
    pub message: String,
}

impl From<std::io::Error> for TensorError {
    fn from(e: std::io::Error) -> Self {
        TensorError::Io(IoError {
            kind: e.kind(),
            message: e.to_string(),
        })
    }
}

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
