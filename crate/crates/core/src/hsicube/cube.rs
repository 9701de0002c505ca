use super::{CubeError, Result};
use crate::gradcore::Tensor;

/// Hyperspectral cube stored band-major: `data[(band * height + row) * width + col]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HsiCube {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f64>,
}

impl HsiCube {
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(CubeError::DimensionMismatch(format!(
                "empty cube {width}x{height}x{bands}"
            )));
        }
        if data.len() != width * height * bands {
            return Err(CubeError::HeaderMismatch {
                declared: width * height * bands,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CubeError::NonFiniteData);
        }
        Ok(Self {
            width,
            height,
            bands,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, bands: usize) -> Self {
        Self {
            width,
            height,
            bands,
            data: vec![0.0; width * height * bands],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn band(&self, b: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f64 {
        self.data[(band * self.height + row) * self.width + col]
    }

    /// Spectrum of pixel `p` (row-major pixel index).
    pub fn spectrum(&self, p: usize) -> Vec<f64> {
        let n = self.pixels();
        (0..self.bands).map(|b| self.data[b * n + p]).collect()
    }

    pub fn same_shape(&self, other: &HsiCube) -> bool {
        self.width == other.width && self.height == other.height && self.bands == other.bands
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new([self.bands, self.height, self.width], self.data.clone())
            .expect("cube length invariant")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (c, h, w) = t
            .dims3()
            .map_err(|e| CubeError::DimensionMismatch(e.to_string()))?;
        Self::new(w, h, c, t.data().to_vec())
    }
}

/// Three-channel image, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(CubeError::HeaderMismatch {
                declared: width * height * 3,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CubeError::NonFiniteData);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, p: usize) -> [f64; 3] {
        let n = self.width * self.height;
        [self.data[p], self.data[n + p], self.data[2 * n + p]]
    }

    /// The image as a 3-band cube, e.g. for writing to an HSC1 file.
    pub fn to_cube(&self) -> HsiCube {
        HsiCube {
            width: self.width,
            height: self.height,
            bands: 3,
            data: self.data.clone(),
        }
    }

    pub fn from_cube(cube: &HsiCube) -> Result<Self> {
        if cube.bands != 3 {
            return Err(CubeError::DimensionMismatch(format!(
                "RGB needs 3 bands, cube has {}",
                cube.bands
            )));
        }
        Self::new(cube.width, cube.height, cube.data.clone())
    }

    pub fn to_tensor(&self) -> Tensor {
        self.to_cube().to_tensor()
    }
}
