//! Computational core for unpaired RGB-to-hyperspectral generation.

pub mod gradcore;
pub mod hsicube;
pub mod nukes;
pub mod gmsa;
pub mod nukesformer;
pub mod losses;
pub mod metrics;
