//! U-shaped generators for both translation directions, patch
//! discriminators, contrastive projection heads, and the model that owns
//! all of them.

mod discriminator;
mod generator;
mod model;
mod projector;

pub use discriminator::{discriminate, Discriminator, DiscriminatorConfig};
pub use generator::{bypass_forward, generator_forward, GenOutput, Generator, GeneratorConfig};
pub use model::{count_params, cycle_pass, CycleOutputs, ModelConfig, NukesFormer, Role, GROUPS};
pub use projector::Projector;

use thiserror::Error;

use crate::gmsa::GmsaError;
use crate::gradcore::GradError;
use crate::nukes::NukesError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("spatial size {height}x{width} not divisible by {factor}")]
    OddSpatialSize { height: usize, width: usize, factor: usize },
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gmsa(#[from] GmsaError),
    #[error(transparent)]
    Nukes(#[from] NukesError),
    #[error(transparent)]
    Grad(#[from] GradError),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;
