use serde::{Deserialize, Serialize};

use super::{Discriminator, DiscriminatorConfig, GenOutput, Generator, GeneratorConfig, ModelError, Projector, Result};
use crate::gradcore::{Binder, ParamSet, ParamSpec, Var};

/// Parameter groups, in checkpoint order.
pub const GROUPS: [&str; 8] = ["g_rh", "g_hr", "d_h", "d_r", "f_a", "f_b", "nde_rh", "nde_hr"];

const RGB: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub bands: usize,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub projector_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            bands: 31,
            generator: GeneratorConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            projector_dim: 64,
        }
    }
}

/// What a parameter count is for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Everything optimized during training.
    Train,
    /// Only what RGB-to-HSI inference loads.
    Infer,
}

impl Role {
    pub fn groups(self) -> &'static [&'static str] {
        match self {
            Role::Train => &GROUPS,
            Role::Infer => &GROUPS[..1],
        }
    }
}

/// All networks of the unpaired setup.
#[derive(Clone, Debug)]
pub struct NukesFormer {
    pub config: ModelConfig,
    /// RGB -> HSI; bypass adapters in `nde_rh`.
    pub g_rh: Generator,
    /// HSI -> RGB; bypass adapters in `nde_hr`.
    pub g_hr: Generator,
    pub d_h: Discriminator,
    pub d_r: Discriminator,
    /// Projects `g_hr` features.
    pub f_a: Projector,
    /// Projects `g_rh` features.
    pub f_b: Projector,
}

impl NukesFormer {
    pub fn new(config: ModelConfig) -> Result<Self> {
        if config.bands <= RGB {
            return Err(ModelError::InvalidConfig(format!("need more than {RGB} bands, got {}", config.bands)));
        }
        if config.projector_dim == 0 {
            return Err(ModelError::InvalidConfig("projector_dim must be positive".into()));
        }
        let c = config.bands;
        let base = config.generator.base_channels;
        Ok(Self {
            g_rh: Generator::new("g_rh", "nde_rh", RGB, c, config.generator.clone())?,
            g_hr: Generator::new("g_hr", "nde_hr", c, RGB, config.generator.clone())?,
            d_h: Discriminator::new("d_h", c, config.discriminator.clone())?,
            d_r: Discriminator::new("d_r", RGB, config.discriminator.clone())?,
            f_a: Projector::new("f_a", base, config.projector_dim),
            f_b: Projector::new("f_b", base, config.projector_dim),
            config,
        })
    }

    pub fn group_specs(&self, group: &str) -> Vec<ParamSpec> {
        match group {
            "g_rh" => self.g_rh.param_specs(),
            "g_hr" => self.g_hr.param_specs(),
            "d_h" => self.d_h.param_specs(),
            "d_r" => self.d_r.param_specs(),
            "f_a" => self.f_a.param_specs(),
            "f_b" => self.f_b.param_specs(),
            "nde_rh" => self.g_rh.bypass_specs(),
            "nde_hr" => self.g_hr.bypass_specs(),
            _ => Vec::new(),
        }
    }

    pub fn param_specs(&self, role: Role) -> Vec<ParamSpec> {
        role.groups().iter().flat_map(|g| self.group_specs(g)).collect()
    }

    pub fn init_params(&self, role: Role, seed: u64) -> Result<ParamSet> {
        Ok(ParamSet::from_specs(&self.param_specs(role), seed)?)
    }
}

/// Scalar parameter count of the groups `role` needs.
pub fn count_params(model: &NukesFormer, role: Role) -> usize {
    model.param_specs(role).iter().map(ParamSpec::numel).sum()
}

/// Both cycles of one step. `x` is an HSI cube `[C,H,W]`, `y` an unrelated
/// RGB image `[3,H,W]`.
#[derive(Clone, Copy, Debug)]
pub struct CycleOutputs<'t> {
    /// `G_hr(x)`
    pub y_fake: GenOutput<'t>,
    /// `G_rh(G_hr(x))`
    pub x_rec: GenOutput<'t>,
    /// `G_rh(y)`
    pub x_fake: GenOutput<'t>,
    /// `G_hr(G_rh(y))`
    pub y_rec: GenOutput<'t>,
}

/// Runs both generator cycles through one binder, so each generator's
/// parameters are the same leaves in both of its uses.
pub fn cycle_pass<'t>(model: &NukesFormer, b: &Binder<'t, '_>, x: Var<'t>, y: Var<'t>) -> Result<CycleOutputs<'t>> {
    let y_fake = model.g_hr.forward(b, x)?;
    let x_rec = model.g_rh.forward(b, y_fake.image)?;
    let x_fake = model.g_rh.forward(b, y)?;
    let y_rec = model.g_hr.forward(b, x_fake.image)?;
    Ok(CycleOutputs { y_fake, x_rec, x_fake, y_rec })
}
