use serde::{Deserialize, Serialize};

use super::{MetricError, Result};
use crate::hsicube::HsiCube;

/// Reference elements with magnitude below this are left out of MRAE.
pub const MRAE_GUARD: f64 = 1e-6;
/// SSIM stabilizers for data on a unit range.
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

pub(crate) fn check_shape(x: &HsiCube, y: &HsiCube) -> Result<()> {
    if x.same_shape(y) {
        Ok(())
    } else {
        Err(MetricError::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            x.width(),
            x.height(),
            x.bands(),
            y.width(),
            y.height(),
            y.bands()
        )))
    }
}

pub fn rmse(x: &HsiCube, x_rec: &HsiCube) -> Result<f64> {
    check_shape(x, x_rec)?;
    let n = x.data().len() as f64;
    let ss: f64 = x.data().iter().zip(x_rec.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / n).sqrt())
}

pub fn mrae(x: &HsiCube, x_rec: &HsiCube) -> Result<f64> {
    check_shape(x, x_rec)?;
    let (mut sum, mut kept) = (0.0, 0usize);
    for (a, b) in x.data().iter().zip(x_rec.data()) {
        if a.abs() >= MRAE_GUARD {
            sum += ((a - b) / a).abs();
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(MetricError::AllElementsGuarded);
    }
    Ok(sum / kept as f64)
}

/// PSNR after mapping both cubes through the reference's `[min, max] -> [0, 255]`.
pub fn psnr(x: &HsiCube, x_rec: &HsiCube) -> Result<f64> {
    check_shape(x, x_rec)?;
    let lo = x.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(MetricError::ConstantReference);
    }
    let k = 255.0 / (hi - lo);
    let n = x.data().len() as f64;
    let mse: f64 = x
        .data()
        .iter()
        .zip(x_rec.data())
        .map(|(a, b)| {
            let d = (a - b) * k;
            d * d
        })
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Err(MetricError::IdenticalImages);
    }
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// SSIM of one band from global statistics (population moments).
pub(crate) fn band_ssim(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
        cov += (x - ma) * (y - mb);
    }
    let (va, vb, cov) = (va / n, vb / n, cov / n);
    ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
}

/// Mean over bands of the global-statistics SSIM.
pub fn ssim(x: &HsiCube, x_rec: &HsiCube) -> Result<f64> {
    check_shape(x, x_rec)?;
    let c = x.bands();
    Ok((0..c).map(|b| band_ssim(x.band(b), x_rec.band(b))).sum::<f64>() / c as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamMode {
    /// Angle between corresponding bands as spatial vectors.
    #[default]
    Band,
    /// Angle between corresponding pixel spectra.
    Pixel,
}

pub(crate) fn angle_deg(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> Result<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0).acos().to_degrees())
}

/// Mean spectral angle in degrees.
pub fn sam(x: &HsiCube, x_rec: &HsiCube, mode: SamMode) -> Result<f64> {
    check_shape(x, x_rec)?;
    match mode {
        SamMode::Band => {
            let c = x.bands();
            let mut sum = 0.0;
            for b in 0..c {
                sum += angle_deg(x.band(b).iter().copied(), x_rec.band(b).iter().copied())?;
            }
            Ok(sum / c as f64)
        }
        SamMode::Pixel => {
            let n = x.pixels();
            let mut sum = 0.0;
            for p in 0..n {
                sum += angle_deg(x.spectrum(p).into_iter(), x_rec.spectrum(p).into_iter())?;
            }
            Ok(sum / n as f64)
        }
    }
}
