//! Reconstruction quality metrics and error maps.

mod report;
mod scalar;

use std::path::PathBuf;

use thiserror::Error;

pub use report::{error_map, error_map_values, write_pgm, BandSelect, MetricReport, PerBand};
pub use scalar::{mrae, psnr, rmse, sam, ssim, SamMode, MRAE_GUARD, SSIM_C1, SSIM_C2};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("every reference element is below the MRAE guard")]
    AllElementsGuarded,
    #[error("images are identical, PSNR is infinite")]
    IdenticalImages,
    #[error("reference cube is constant, cannot scale to [0, 255]")]
    ConstantReference,
    #[error("zero vector in spectral angle")]
    ZeroVector,
    #[error("band {band} out of range for {bands} bands")]
    BandOutOfRange { band: usize, bands: usize },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, MetricError>;
