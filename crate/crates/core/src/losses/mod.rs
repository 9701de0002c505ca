//! Training objectives and their weighted total.

mod adversarial;
mod contrastive;
mod pixel;
mod total;

use thiserror::Error;

use crate::gradcore::GradError;
use crate::nukesformer::ModelError;

pub use adversarial::{adversarial_loss, adversarial_terms, AdvTerms, ADV_EPS};
pub use contrastive::{
    contrastive_loss, dcpm_losses, dcpm_sample, geometric_contrastive, spectral_contrastive, DcpmConfig, DcpmSample,
    Domain, Kernel, PatchCodeSet, PatchRef,
};
pub use pixel::{cycle_loss, mse, non_degraded_loss};
pub use total::{total_loss, LossParts, LossTerms, LossWeights, CSV_HEADER};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("zero-length code vector")]
    ZeroVector,
    #[error("too few patches: {available} available, {requested} requested")]
    TooFewPatches { available: usize, requested: usize },
    #[error("invalid loss parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grad(#[from] GradError),
}

pub type Result<T> = std::result::Result<T, LossError>;
