//! Training, inference and evaluation harness behind the `nukesctl` and
//! `hsic` binaries.

pub mod ablate;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod gradsuite;
pub mod manifest;
pub mod train;

use std::path::{Path, PathBuf};

use thiserror::Error;

use nukes_core::gmsa::GmsaError;
use nukes_core::gradcore::GradError;
use nukes_core::hsicube::CubeError;
use nukes_core::losses::LossError;
use nukes_core::metrics::MetricError;
use nukes_core::nukes::NukesError;
use nukes_core::nukesformer::ModelError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Nukes(#[from] NukesError),
    #[error(transparent)]
    Gmsa(#[from] GmsaError),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Parallelism cap from `NUKES_THREADS`. The harness runs on one thread
/// whatever the value, so this only validates and reports it.
pub fn thread_cap() -> std::result::Result<usize, String> {
    match std::env::var("NUKES_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("NUKES_THREADS must be a positive integer, got `{v}`")),
        },
    }
}
