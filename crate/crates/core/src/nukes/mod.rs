//! Non-uniform rational B-spline KAN: basis evaluation, the rational curve,
//! knot generation and the gated feed-forward block built on them.

mod basis;
mod deriv;
mod layer;
mod ncpg;
mod spline;

pub use basis::{
    basis_count, bspline_basis_matrix, bspline_basis_recursive, eval_span_row, find_span, span_matrix,
    validate_knots, BasisRow, MAX_DEGREE,
};
pub use deriv::{basis_derivatives, span_matrix_jacobian, BasisDerivs, SpanJacobian};
pub use layer::{nuk_apply, nukes_ffn_forward, spec_conv, NukesConfig, NukesLayer};
pub use ncpg::{
    cumulative_positions, greville, knot_jacobian, ncpg_generate, ncpg_knots, uniform_knots, NcpgConfig,
};
pub use spline::{nuk_eval, nuk_eval_batch, SplineSpec};

use thiserror::Error;

use crate::gradcore::GradError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NukesError {
    #[error("basis index {index} out of range ({count} functions)")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("degree {degree} unsupported (max {max})")]
    DegreeUnsupported { degree: usize, max: usize },
    #[error("x = {x} outside spline domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("rational denominator vanished at x = {x}")]
    ZeroDenominator { x: f64 },
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("spline weights must be positive and finite")]
    InvalidWeights,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Grad(#[from] GradError),
}

pub type Result<T, E = NukesError> = std::result::Result<T, E>;
