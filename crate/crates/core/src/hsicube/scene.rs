use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{CubeError, HsiCube, Result};
use crate::gradcore::ops::reflect;

/// Recipe for a synthetic linear-mixture scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_endmembers: usize,
    /// Standard deviation, in pixels, of the blur applied to the abundance noise.
    pub spatial_smoothness: f64,
    pub bands: usize,
    pub width: usize,
    pub height: usize,
}

impl SceneSpec {
    pub fn new(seed: u64, bands: usize, width: usize, height: usize) -> Self {
        Self {
            seed,
            n_endmembers: 4,
            spatial_smoothness: 3.0,
            bands,
            width,
            height,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_endmembers == 0 || self.bands == 0 || self.width == 0 || self.height == 0 {
            return Err(CubeError::DimensionMismatch(format!("invalid scene spec {self:?}")));
        }
        if !(self.spatial_smoothness >= 0.0 && self.spatial_smoothness.is_finite()) {
            return Err(CubeError::DimensionMismatch(format!(
                "spatial smoothness {}",
                self.spatial_smoothness
            )));
        }
        Ok(())
    }
}

/// A scene together with the mixture that produced it.
#[derive(Clone, Debug)]
pub struct SynthScene {
    pub cube: HsiCube,
    /// `[n_endmembers][bands]`
    pub endmembers: Vec<Vec<f64>>,
    /// `[n_endmembers][height * width]`, summing to 1 at every pixel.
    pub abundances: Vec<Vec<f64>>,
}

/// Contrast applied to the standardized fields before normalization; higher
/// values give more distinct material regions.
const ABUNDANCE_CONTRAST: f64 = 2.5;

fn endmember(rng: &mut ChaCha8Rng, bands: usize) -> Vec<f64> {
    let span = bands.saturating_sub(1).max(1) as f64;
    let base = rng.random_range(0.05..0.25);
    let n_bumps = rng.random_range(1..=3);
    let bumps: Vec<(f64, f64, f64)> = (0..n_bumps)
        .map(|_| {
            let amp = rng.random_range(0.2..0.6);
            let center = rng.random_range(0.0..=span);
            let width = rng.random_range((span / 12.0).max(0.5)..=(span / 4.0).max(0.6));
            (amp, center, width)
        })
        .collect();
    let mut s: Vec<f64> = (0..bands)
        .map(|b| {
            let x = b as f64;
            base + bumps
                .iter()
                .map(|&(a, c, w)| a * (-0.5 * ((x - c) / w).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    let max = s.iter().cloned().fold(0.0, f64::max);
    if max > 1.0 {
        s.iter_mut().for_each(|v| *v /= max);
    }
    s
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-r..=r)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Separable Gaussian blur with reflected borders.
fn blur(field: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * field[y * w + reflect(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[reflect(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

pub fn synth_scene_parts(spec: &SceneSpec) -> Result<SynthScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h, c) = (spec.width, spec.height, spec.bands);
    let n = w * h;
    let endmembers: Vec<Vec<f64>> = (0..spec.n_endmembers).map(|_| endmember(&mut rng, c)).collect();

    let logits: Vec<Vec<f64>> = (0..spec.n_endmembers)
        .map(|_| {
            let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let f = blur(&noise, w, h, spec.spatial_smoothness);
            let mean = f.iter().sum::<f64>() / n as f64;
            let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            f.into_iter().map(|v| ABUNDANCE_CONTRAST * (v - mean) / sd).collect()
        })
        .collect();

    let mut abundances = vec![vec![0.0; n]; spec.n_endmembers];
    for p in 0..n {
        let m = logits.iter().map(|l| l[p]).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l[p] - m).exp()).collect();
        let s: f64 = e.iter().sum();
        for (k, ek) in e.into_iter().enumerate() {
            abundances[k][p] = ek / s;
        }
    }

    let mut data = vec![0.0; c * n];
    for b in 0..c {
        for p in 0..n {
            let v: f64 = (0..spec.n_endmembers).map(|k| abundances[k][p] * endmembers[k][b]).sum();
            data[b * n + p] = v.clamp(0.0, 1.0);
        }
    }
    Ok(SynthScene {
        cube: HsiCube::new(w, h, c, data)?,
        endmembers,
        abundances,
    })
}

/// Synthetic cube whose pixels are convex mixtures of smooth endmember spectra.
pub fn synth_scene(spec: &SceneSpec) -> Result<HsiCube> {
    Ok(synth_scene_parts(spec)?.cube)
}
