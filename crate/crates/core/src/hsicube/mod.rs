//! Hyperspectral cubes, their file format, the spectral response operator
//! and its range/null-space projectors, and synthetic scene generation.

mod cube;
mod io;
mod scene;
mod srf;

pub use cube::{HsiCube, RgbImage};
pub use io::{load_cube, load_srf_csv, save_cube, save_srf_csv, CubeHeader, CUBE_MAGIC};
pub use scene::{synth_scene, synth_scene_parts, SceneSpec, SynthScene};
pub use srf::{build_srf, default_srf, degrade, null_component, range_component, ResponseCurve, SrfOperator};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CubeError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("header declares {declared} values but payload holds {found}")]
    HeaderMismatch { declared: usize, found: usize },
    #[error("payload contains non-finite values")]
    NonFiniteData,
    #[error("invalid header: {0}")]
    BadHeader(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("spectral response has rank {rank}, need 3")]
    RankDeficient { rank: usize },
    #[error("invalid SRF file: {0}")]
    SrfParse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CubeError> = std::result::Result<T, E>;
