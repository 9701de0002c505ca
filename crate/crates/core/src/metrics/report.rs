use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scalar::{angle_deg, band_ssim, check_shape, MRAE_GUARD};
use super::{mrae, psnr, rmse, sam, ssim, MetricError, Result, SamMode};
use crate::hsicube::HsiCube;

/// Per-band breakdown, one entry per band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerBand {
    pub rmse: Vec<f64>,
    /// `None` where every element of the band is guarded.
    pub mrae: Vec<Option<f64>>,
    pub ssim: Vec<f64>,
    /// Angle between the band images, in degrees.
    pub sam_deg: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub mrae: f64,
    /// `None` for identical cubes.
    pub psnr_db: Option<f64>,
    pub ssim_mean: f64,
    pub sam_deg: f64,
    pub sam_mode: SamMode,
    pub per_band: PerBand,
}

impl MetricReport {
    pub fn compute(x: &HsiCube, x_rec: &HsiCube, mode: SamMode) -> Result<Self> {
        check_shape(x, x_rec)?;
        let psnr_db = match psnr(x, x_rec) {
            Ok(v) => Some(v),
            Err(MetricError::IdenticalImages) => None,
            Err(e) => return Err(e),
        };
        let c = x.bands();
        let mut per_band = PerBand {
            rmse: Vec::with_capacity(c),
            mrae: Vec::with_capacity(c),
            ssim: Vec::with_capacity(c),
            sam_deg: Vec::with_capacity(c),
        };
        for b in 0..c {
            let (a, r) = (x.band(b), x_rec.band(b));
            let n = a.len() as f64;
            per_band.rmse.push((a.iter().zip(r).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / n).sqrt());
            let kept: Vec<f64> = a
                .iter()
                .zip(r)
                .filter(|(p, _)| p.abs() >= MRAE_GUARD)
                .map(|(p, q)| ((p - q) / p).abs())
                .collect();
            per_band.mrae.push((!kept.is_empty()).then(|| kept.iter().sum::<f64>() / kept.len() as f64));
            per_band.ssim.push(band_ssim(a, r));
            per_band.sam_deg.push(angle_deg(a.iter().copied(), r.iter().copied())?);
        }
        Ok(Self {
            rmse: rmse(x, x_rec)?,
            mrae: mrae(x, x_rec)?,
            psnr_db,
            ssim_mean: ssim(x, x_rec)?,
            sam_deg: sam(x, x_rec, mode)?,
            sam_mode: mode,
            per_band,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Bands entering an error map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BandSelect {
    One(usize),
    All,
}

/// Per-pixel RMSE over the selected bands, row-major `H x W`.
pub fn error_map_values(x: &HsiCube, x_rec: &HsiCube, bands: BandSelect) -> Result<Vec<f64>> {
    check_shape(x, x_rec)?;
    let c = x.bands();
    let sel: Vec<usize> = match bands {
        BandSelect::All => (0..c).collect(),
        BandSelect::One(b) if b < c => vec![b],
        BandSelect::One(b) => return Err(MetricError::BandOutOfRange { band: b, bands: c }),
    };
    let n = x.pixels();
    Ok((0..n)
        .map(|p| {
            let ss: f64 = sel
                .iter()
                .map(|&b| {
                    let d = x.band(b)[p] - x_rec.band(b)[p];
                    d * d
                })
                .sum();
            (ss / sel.len() as f64).sqrt()
        })
        .collect())
}

/// Binary 8-bit PGM of `values` min-max scaled to `[0, 255]`. A constant map
/// is written as all zeros.
pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(MetricError::ShapeMismatch(format!("{} values for {width}x{height}", values.len())));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend(values.iter().map(|v| if range > 0.0 { ((v - lo) / range * 255.0).round() as u8 } else { 0 }));
    fs::write(path, bytes).map_err(|source| MetricError::Io { path: path.to_path_buf(), source })
}

/// Writes the RMSE error map of the selected bands as a `W x H` PGM.
pub fn error_map(x: &HsiCube, x_rec: &HsiCube, bands: BandSelect, path: &Path) -> Result<()> {
    let v = error_map_values(x, x_rec, bands)?;
    write_pgm(path, x.width(), x.height(), &v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm_pixels(path: &Path) -> (String, Vec<u8>) {
        let bytes = fs::read(path).unwrap();
        let mut lines = 0;
        let mut cut = 0;
        for (i, b) in bytes.iter().enumerate() {
            if *b == b'\n' {
                lines += 1;
                if lines == 3 {
                    cut = i + 1;
                    break;
                }
            }
        }
        (String::from_utf8(bytes[..cut].to_vec()).unwrap(), bytes[cut..].to_vec())
    }

    #[test]
    fn error_map_examples() {
        let dir = tempfile::tempdir().unwrap();
        let x = HsiCube::new(3, 2, 2, (0..12).map(|i| i as f64 / 12.0).collect()).unwrap();
        let p = dir.path().join("same.pgm");
        error_map(&x, &x, BandSelect::All, &p).unwrap();
        let (head, px) = pgm_pixels(&p);
        assert_eq!(head, "P5\n3 2\n255\n");
        assert_eq!(px, vec![0; 6]);

        let mut d = x.data().to_vec();
        d[6 + 4] += 0.5; // band 1, row 1, col 1
        let y = HsiCube::new(3, 2, 2, d).unwrap();
        error_map(&x, &y, BandSelect::All, &p).unwrap();
        assert_eq!(pgm_pixels(&p).1, vec![0, 0, 0, 0, 255, 0]);
        error_map(&x, &y, BandSelect::One(0), &p).unwrap();
        assert_eq!(pgm_pixels(&p).1, vec![0; 6]);
        assert!(matches!(
            error_map(&x, &y, BandSelect::One(2), &p),
            Err(MetricError::BandOutOfRange { .. })
        ));
    }

    #[test]
    fn report_roundtrips_json() {
        let x = HsiCube::new(2, 2, 3, (1..=12).map(|i| i as f64 / 12.0).collect()).unwrap();
        let y = HsiCube::new(2, 2, 3, (1..=12).map(|i| i as f64 / 12.0 + 0.01 * (i % 3) as f64).collect()).unwrap();
        let r = MetricReport::compute(&x, &y, SamMode::Band).unwrap();
        assert_eq!(r.per_band.rmse.len(), 3);
        assert!(r.rmse >= 0.0 && r.mrae >= 0.0 && r.ssim_mean <= 1.0 && r.sam_deg >= 0.0);
        let back: MetricReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let same = MetricReport::compute(&x, &x, SamMode::Pixel).unwrap();
        assert_eq!(same.psnr_db, None);
        assert!(r.to_json().contains("\"sam_mode\": \"band\""));
    }
}
