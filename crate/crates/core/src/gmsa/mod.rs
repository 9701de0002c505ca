//! Spectral self-attention fused with a dynamic Gabor branch, and the
//! pre-norm block that pairs it with the spline feed-forward layer.

mod block;
mod gabor;
mod msa;

pub use block::{gmsa_forward, nuk_msa_block, Gmsa, GmsaConfig, NukMsaBlock};
pub use gabor::{gabor_branch, gabor_kernel, gabor_kernels, GaborBank, GaborConfig};
pub use msa::{spectral_msa, spectral_msa_with_attention, AttnScale, MsaParams};

use thiserror::Error;

use crate::gradcore::GradError;
use crate::nukes::NukesError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GmsaError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Nukes(#[from] NukesError),
    #[error(transparent)]
    Grad(#[from] GradError),
}

pub type Result<T, E = GmsaError> = std::result::Result<T, E>;
