use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use nukes_core::gradcore::AdamConfig;
use nukes_core::losses::{DcpmConfig, LossWeights};
use nukes_core::nukesformer::{DiscriminatorConfig, GeneratorConfig, ModelConfig};

use crate::{HarnessError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    /// Parameters are rounded to f32 after every update.
    F32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Cosine schedule length; `None` uses the step count.
    pub horizon: Option<u64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, horizon: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Unpaired HSI training scenes.
    pub hsi_scenes: usize,
    /// Unpaired RGB training images, each from its own HSI scene.
    pub rgb_scenes: usize,
    /// Held-out paired scenes for validation.
    pub val_scenes: usize,
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub endmembers: usize,
    pub spatial_smoothness: f64,
    /// Gaussian noise added when rendering RGB images.
    pub rgb_noise_sigma: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            hsi_scenes: 8,
            rgb_scenes: 8,
            val_scenes: 4,
            width: 32,
            height: 32,
            bands: 31,
            endmembers: 4,
            spatial_smoothness: 3.0,
            rgb_noise_sigma: 0.0,
        }
    }
}

/// Everything a training run depends on. Every field has a default and
/// unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub seed: u64,
    pub steps: usize,
    pub precision: Precision,
    pub data: DataConfig,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub projector_dim: usize,
    pub losses: LossWeights,
    pub dcpm: DcpmConfig,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 500,
            precision: Precision::F64,
            data: DataConfig::default(),
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            projector_dim: 64,
            losses: LossWeights::default(),
            dcpm: DcpmConfig::default(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            bands: self.data.bands,
            generator: self.generator.clone(),
            discriminator: self.discriminator.clone(),
            projector_dim: self.projector_dim,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr_init: self.optimizer.lr,
            beta1: self.optimizer.beta1,
            beta2: self.optimizer.beta2,
            eps: self.optimizer.eps,
            horizon: self.optimizer.horizon.unwrap_or(self.steps as u64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        if self.steps == 0 {
            return bad("steps must be >= 1".into());
        }
        let d = &self.data;
        if d.hsi_scenes == 0 || d.rgb_scenes == 0 || d.val_scenes == 0 {
            return bad("every scene set needs at least one scene".into());
        }
        self.generator.validate().map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        let factor = (1usize << self.generator.depth()).max(4);
        for (name, v) in [("width", d.width), ("height", d.height)] {
            if v % factor != 0 || v < 8 {
                return bad(format!("{name} {v} must be a multiple of {factor} and at least 8"));
            }
        }
        if d.bands <= 3 {
            return bad(format!("bands {} must exceed 3", d.bands));
        }
        if d.endmembers == 0 || !(d.spatial_smoothness >= 0.0) || !(d.rgb_noise_sigma >= 0.0) {
            return bad("scene parameters out of range".into());
        }
        self.losses.validate().map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        let o = &self.optimizer;
        if !(o.lr > 0.0) || !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) || !(o.eps > 0.0) {
            return bad("optimizer parameters out of range".into());
        }
        let pixels = d.width * d.height;
        if self.dcpm.n_patches == 0 || self.dcpm.n_patches > pixels {
            return bad(format!("n_patches {} must be in 1..={pixels}", self.dcpm.n_patches));
        }
        if self.dcpm.n_negatives > 2 * (self.dcpm.n_patches - 1) {
            return bad("n_negatives exceeds the other sampled codes".into());
        }
        if !(self.dcpm.tau_spectral > 0.0) || !(self.dcpm.tau_geometric > 0.0) || self.projector_dim == 0 {
            return bad("contrastive parameters out of range".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let c = TrainConfig::from_json("{}").unwrap();
        assert_eq!(c, TrainConfig::default());
        assert_eq!(c.data.width, 32);
        assert_eq!(c.steps, 500);
        assert_eq!(c.generator.stage_blocks, vec![1, 1, 2, 1, 1]);
        assert_eq!(c.adam().horizon, 500);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(TrainConfig::from_json(r#"{"stepz": 3}"#), Err(HarnessError::ConfigInvalid(_))));
        assert!(matches!(
            TrainConfig::from_json(r#"{"data": {"widht": 16}}"#),
            Err(HarnessError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn invariants_enforced() {
        for bad in [r#"{"steps": 0}"#, r#"{"data": {"width": 18}}"#, r#"{"data": {"bands": 3}}"#] {
            assert!(TrainConfig::from_json(bad).is_err(), "{bad}");
        }
        let c = TrainConfig::from_json(r#"{"data": {"width": 16, "height": 8}, "steps": 1}"#).unwrap();
        assert_eq!((c.data.width, c.data.height), (16, 8));
    }

    #[test]
    fn json_roundtrip() {
        let c = TrainConfig { seed: 9, ..TrainConfig::default() };
        assert_eq!(TrainConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
