//! Reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every operation applied to [`Var`] handles together
//! with an explicit vector-Jacobian rule. [`Tape::backward`] walks the
//! records in reverse insertion order, which is a valid topological order
//! because an op can only consume values that already exist on the tape.
//!
//! Model code never owns parameters directly: they live in a [`ParamSet`]
//! and are bound to the tape through a [`Binder`], which returns the same
//! leaf for every use of a name within one pass. That is what makes a
//! generator used twice in a cycle share one gradient accumulator.

mod adam;
mod check;
pub mod ops;
mod params;
mod tape;
mod tensor;

pub use adam::{adam_step, cosine_lr, AdamConfig, AdamState};
pub use check::{grad_check, grad_check_many, CheckOptions, GradReport};
pub use params::{Binder, Init, ParamSet, ParamSpec};
pub use tape::{Backward, Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("expected a scalar output, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("backward already ran on this tape")]
    TapeConsumed,
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}

pub type Result<T, E = GradError> = std::result::Result<T, E>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> GradError {
    GradError::ShapeMismatch {
        op,
        detail: detail.into(),
    }
}
