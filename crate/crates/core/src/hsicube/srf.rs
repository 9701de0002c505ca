use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CubeError, HsiCube, Result, RgbImage};

/// Gaussian response of one RGB channel over band index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponseCurve {
    pub center: f64,
    pub width: f64,
}

/// Linear camera model `y = D x + n` with its SVD pseudo-inverse and the
/// projectors onto the range and null space of `D`.
#[derive(Clone, Debug)]
pub struct SrfOperator {
    d: DMatrix<f64>,
    d_pinv: DMatrix<f64>,
    range_proj: DMatrix<f64>,
    null_proj: DMatrix<f64>,
    noise_sigma: f64,
}

impl SrfOperator {
    /// Wraps a 3×C response matrix as given (no row normalization).
    pub fn from_matrix(d: DMatrix<f64>, noise_sigma: f64) -> Result<Self> {
        if d.nrows() != 3 || d.ncols() <= 3 {
            return Err(CubeError::DimensionMismatch(format!(
                "SRF must be 3xC with C > 3, got {}x{}",
                d.nrows(),
                d.ncols()
            )));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(CubeError::DimensionMismatch(format!("noise sigma {noise_sigma}")));
        }
        let c = d.ncols();
        let svd = d.clone().svd(true, true);
        let sigma_max = svd.singular_values.max();
        let thresh = 1e-10 * sigma_max;
        let rank = svd.singular_values.iter().filter(|&&s| s > thresh).count();
        if rank < 3 {
            return Err(CubeError::RankDeficient { rank });
        }
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested V^T");
        // D^+ = V S^-1 U^T
        let mut s_inv_ut = u.transpose();
        for (k, s) in svd.singular_values.iter().enumerate() {
            s_inv_ut.row_mut(k).scale_mut(1.0 / s);
        }
        let d_pinv = v_t.transpose() * s_inv_ut;
        let range_proj = &d_pinv * &d;
        let null_proj = DMatrix::identity(c, c) - &range_proj;
        Ok(Self {
            d,
            d_pinv,
            range_proj,
            null_proj,
            noise_sigma,
        })
    }

    pub fn with_noise_sigma(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma.max(0.0);
        self
    }

    pub fn bands(&self) -> usize {
        self.d.ncols()
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn d_pinv(&self) -> &DMatrix<f64> {
        &self.d_pinv
    }

    pub fn range_proj(&self) -> &DMatrix<f64> {
        &self.range_proj
    }

    pub fn null_proj(&self) -> &DMatrix<f64> {
        &self.null_proj
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// `D` as a row-major `[3, C]` slice, handy for building 1×1 conv weights.
    pub fn d_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.bands());
        for r in 0..3 {
            out.extend(self.d.row(r).iter());
        }
        out
    }
}

/// Gaussian rows over band index, each normalized to sum 1.
pub fn build_srf(curves: &[ResponseCurve; 3], bands: usize) -> Result<SrfOperator> {
    if bands <= 3 {
        return Err(CubeError::DimensionMismatch(format!("need more than 3 bands, got {bands}")));
    }
    let mut d = DMatrix::zeros(3, bands);
    for (r, curve) in curves.iter().enumerate() {
        if !(curve.width > 0.0) {
            return Err(CubeError::DimensionMismatch(format!("curve width {}", curve.width)));
        }
        for b in 0..bands {
            let z = (b as f64 - curve.center) / curve.width;
            d[(r, b)] = (-0.5 * z * z).exp();
        }
        let s: f64 = d.row(r).sum();
        if !(s > 0.0) {
            return Err(CubeError::RankDeficient { rank: 0 });
        }
        d.row_mut(r).scale_mut(1.0 / s);
    }
    SrfOperator::from_matrix(d, 0.0)
}

/// Red, green and blue curves placed at 80%, 50% and 20% of the band range.
pub fn default_srf(bands: usize) -> Result<SrfOperator> {
    let span = bands.saturating_sub(1) as f64;
    let width = (bands as f64 / 8.0).max(0.75);
    build_srf(
        &[
            ResponseCurve { center: 0.8 * span, width },
            ResponseCurve { center: 0.5 * span, width },
            ResponseCurve { center: 0.2 * span, width },
        ],
        bands,
    )
}

fn check_bands(cube: &HsiCube, srf: &SrfOperator) -> Result<()> {
    if cube.bands() != srf.bands() {
        return Err(CubeError::DimensionMismatch(format!(
            "cube has {} bands, SRF expects {}",
            cube.bands(),
            srf.bands()
        )));
    }
    Ok(())
}

/// Applies `m` (rows × C) to every pixel spectrum of `data` (band-major).
fn apply_per_pixel(m: &DMatrix<f64>, data: &[f64], pixels: usize) -> Vec<f64> {
    let (rows, c) = m.shape();
    let mut out = vec![0.0; rows * pixels];
    for r in 0..rows {
        let dst = &mut out[r * pixels..(r + 1) * pixels];
        for b in 0..c {
            let w = m[(r, b)];
            if w == 0.0 {
                continue;
            }
            let src = &data[b * pixels..(b + 1) * pixels];
            for (o, &x) in dst.iter_mut().zip(src) {
                *o += w * x;
            }
        }
    }
    out
}

pub fn degrade(cube: &HsiCube, srf: &SrfOperator, with_noise: bool, seed: u64) -> Result<RgbImage> {
    check_bands(cube, srf)?;
    let n = cube.pixels();
    let mut rgb = apply_per_pixel(&srf.d, cube.data(), n);
    if with_noise && srf.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, srf.noise_sigma).expect("sigma checked at construction");
        for v in &mut rgb {
            *v += normal.sample(&mut rng);
        }
    }
    RgbImage::new(cube.width(), cube.height(), rgb)
}

/// `D^+ D x` per pixel.
pub fn range_component(cube: &HsiCube, srf: &SrfOperator) -> Result<HsiCube> {
    check_bands(cube, srf)?;
    let data = apply_per_pixel(&srf.range_proj, cube.data(), cube.pixels());
    HsiCube::new(cube.width(), cube.height(), cube.bands(), data)
}

/// `(I - D^+ D) x` per pixel.
pub fn null_component(cube: &HsiCube, srf: &SrfOperator) -> Result<HsiCube> {
    check_bands(cube, srf)?;
    let data = apply_per_pixel(&srf.null_proj, cube.data(), cube.pixels());
    HsiCube::new(cube.width(), cube.height(), cube.bands(), data)
}
