//! Synthetic unpaired training sets and a paired validation set.

use sha2::{Digest, Sha256};

use nukes_core::hsicube::{default_srf, degrade, synth_scene, HsiCube, RgbImage, SceneSpec, SrfOperator};

use crate::config::DataConfig;
use crate::Result;

/// Independent 64-bit seed for one purpose and index under a master seed.
pub fn derive_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(purpose.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub struct Datasets {
    pub srf: SrfOperator,
    pub hsi: Vec<HsiCube>,
    /// Rendered from scenes that appear nowhere else.
    pub rgb: Vec<RgbImage>,
    /// `(rgb, ground truth)` pairs of held-out scenes.
    pub val: Vec<(RgbImage, HsiCube)>,
}

fn scene(cfg: &DataConfig, seed: u64) -> Result<HsiCube> {
    let spec = SceneSpec {
        seed,
        n_endmembers: cfg.endmembers,
        spatial_smoothness: cfg.spatial_smoothness,
        bands: cfg.bands,
        width: cfg.width,
        height: cfg.height,
    };
    Ok(synth_scene(&spec)?)
}

pub fn build_datasets(cfg: &DataConfig, master_seed: u64) -> Result<Datasets> {
    let srf = default_srf(cfg.bands)?.with_noise_sigma(cfg.rgb_noise_sigma);
    let noisy = cfg.rgb_noise_sigma > 0.0;
    let hsi = (0..cfg.hsi_scenes as u64)
        .map(|i| scene(cfg, derive_seed(master_seed, "hsi", i)))
        .collect::<Result<Vec<_>>>()?;
    let rgb = (0..cfg.rgb_scenes as u64)
        .map(|i| {
            let s = scene(cfg, derive_seed(master_seed, "rgb", i))?;
            Ok(degrade(&s, &srf, noisy, derive_seed(master_seed, "rgb-noise", i))?)
        })
        .collect::<Result<Vec<_>>>()?;
    let val = (0..cfg.val_scenes as u64)
        .map(|i| {
            let s = scene(cfg, derive_seed(master_seed, "val", i))?;
            let r = degrade(&s, &srf, false, 0)?;
            Ok((r, s))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Datasets { srf, hsi, rgb, val })
}

/// Stacks cubes of equal width and bands vertically into one cube.
pub fn stack_rows(cubes: &[HsiCube]) -> Result<HsiCube> {
    let (w, c) = (cubes[0].width(), cubes[0].bands());
    let h: usize = cubes.iter().map(HsiCube::height).sum();
    let mut data = Vec::with_capacity(w * h * c);
    for b in 0..c {
        for cube in cubes {
            data.extend_from_slice(cube.band(b));
        }
    }
    Ok(HsiCube::new(w, h, c, data)?)
}
