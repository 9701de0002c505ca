//! HSC1 cube files and SRF CSV files.
//!
//! An HSC1 file is one line of JSON followed by the payload as
//! little-endian `f32` in band-major order:
//!
//! ```text
//! {"magic":"HSC1","width":W,"height":H,"bands":C,"dtype":"f32","order":"band-major"}\n
//! <W*H*C little-endian f32>
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{CubeError, HsiCube, Result, SrfOperator};

pub const CUBE_MAGIC: &str = "HSC1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub magic: String,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: String,
    pub order: String,
}

impl CubeHeader {
    pub fn for_cube(cube: &HsiCube) -> Self {
        Self {
            magic: CUBE_MAGIC.to_string(),
            width: cube.width(),
            height: cube.height(),
            bands: cube.bands(),
            dtype: "f32".to_string(),
            order: "band-major".to_string(),
        }
    }
}

/// Writes `cube` as HSC1. Values are stored as `f32`, so the round trip is
/// bit-exact for any cube whose values are representable in `f32`
/// (including every cube read from disk).
pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    let header = serde_json::to_string(&CubeHeader::for_cube(cube))
        .map_err(|e| CubeError::BadHeader(e.to_string()))?;
    let mut buf = Vec::with_capacity(header.len() + 1 + cube.data().len() * 4);
    buf.extend_from_slice(header.as_bytes());
    buf.push(b'\n');
    for &v in cube.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path.as_ref())?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(CubeError::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CubeError::BadHeader("missing header line".into()))?;
    let header: CubeHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| CubeError::BadHeader(e.to_string()))?;
    if header.magic != CUBE_MAGIC {
        return Err(CubeError::BadHeader(format!("magic {:?}", header.magic)));
    }
    if header.dtype != "f32" || header.order != "band-major" {
        return Err(CubeError::BadHeader(format!(
            "unsupported dtype/order {}/{}",
            header.dtype, header.order
        )));
    }
    let payload = &bytes[nl + 1..];
    let declared = header.width * header.height * header.bands;
    if payload.len() % 4 != 0 || payload.len() / 4 != declared {
        return Err(CubeError::HeaderMismatch {
            declared,
            found: payload.len() / 4,
        });
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    HsiCube::new(header.width, header.height, header.bands, data)
}

/// Reads a 3-row CSV (one row per RGB channel, one column per band).
pub fn load_srf_csv(path: impl AsRef<Path>) -> Result<SrfOperator> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(CubeError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| CubeError::SrfParse(format!("{v:?}: {e}")))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.len() != 3 {
        return Err(CubeError::SrfParse(format!("expected 3 rows, found {}", rows.len())));
    }
    let c = rows[0].len();
    if rows.iter().any(|r| r.len() != c) {
        return Err(CubeError::SrfParse("rows differ in length".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CubeError::NonFiniteData);
    }
    let d = DMatrix::from_row_iterator(3, c, rows.into_iter().flatten());
    SrfOperator::from_matrix(d, 0.0)
}

pub fn save_srf_csv(srf: &SrfOperator, path: impl AsRef<Path>) -> Result<()> {
    let d = srf.d();
    let mut out = String::new();
    for r in 0..3 {
        let row: Vec<String> = (0..d.ncols()).map(|c| format!("{}", d[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hsicube::default_srf;

    #[test]
    fn roundtrip_small_cube() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.hsc");
        let cube = HsiCube::new(2, 2, 4, (0..16).map(|i| i as f64 * 0.25).collect()).unwrap();
        save_cube(&cube, &p).unwrap();
        assert_eq!(load_cube(&p).unwrap(), cube);
    }

    #[test]
    fn zero_cube_payload_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.hsc");
        save_cube(&HsiCube::zeros(1, 1, 31), &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        let header = br#"{"magic":"HSC1","width":1,"height":1,"bands":31,"dtype":"f32","order":"band-major"}"#;
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes[header.len()], b'\n');
        assert_eq!(bytes.len() - header.len() - 1, 124);
    }

    #[test]
    fn truncated_payload_is_header_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.hsc");
        save_cube(&HsiCube::zeros(2, 2, 4), &p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 4);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(
            load_cube(&p),
            Err(CubeError::HeaderMismatch { declared: 16, found: 15 })
        ));
    }

    #[test]
    fn nan_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.hsc");
        save_cube(&HsiCube::zeros(2, 2, 4), &p).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_cube(&p), Err(CubeError::NonFiniteData)));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_cube("/definitely/not/here.hsc"),
            Err(CubeError::MissingFile(_))
        ));
    }

    #[test]
    fn unwritable_destination_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        // a directory path cannot be created as a file
        let err = save_cube(&HsiCube::zeros(1, 1, 1), dir.path()).unwrap_err();
        assert!(matches!(err, CubeError::Io(_)));
    }

    #[test]
    fn srf_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("srf.csv");
        let srf = default_srf(31).unwrap();
        save_srf_csv(&srf, &p).unwrap();
        let back = load_srf_csv(&p).unwrap();
        assert_eq!(back.d(), srf.d());
    }
}
