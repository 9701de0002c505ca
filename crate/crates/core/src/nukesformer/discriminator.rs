use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::gradcore::{Binder, Init, ParamSpec, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminatorConfig {
    /// Width of the first strided conv; later convs use twice this.
    pub width: usize,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self { width: 8, leaky_slope: 0.2 }
    }
}

/// Patch discriminator: three stride-2 3x3 convs and a 1x1 sigmoid head.
/// Maps `[C, H, W]` to per-patch probabilities `[1, H/8, W/8]`.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub prefix: String,
    pub channels: usize,
    pub config: DiscriminatorConfig,
}

impl Discriminator {
    pub fn new(prefix: impl Into<String>, channels: usize, config: DiscriminatorConfig) -> Result<Self> {
        if config.width == 0 {
            return Err(ModelError::InvalidConfig("discriminator width must be positive".into()));
        }
        Ok(Self { prefix: prefix.into(), channels, config })
    }

    fn widths(&self) -> [(usize, usize); 3] {
        let d = self.config.width;
        [(self.channels, d), (d, 2 * d), (2 * d, 2 * d)]
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let p = &self.prefix;
        let mut specs = Vec::new();
        for (i, (cin, cout)) in self.widths().into_iter().enumerate() {
            let bound = 1.0 / ((cin * 9) as f64).sqrt();
            specs.push(ParamSpec::new(format!("{p}.conv{i}.w"), [cout, cin, 3, 3], Init::Uniform(bound)));
            specs.push(ParamSpec::new(format!("{p}.conv{i}.b"), [cout], Init::Zeros));
        }
        let c = 2 * self.config.width;
        specs.push(ParamSpec::new(format!("{p}.head.w"), [1, c], Init::Uniform(1.0 / (c as f64).sqrt())));
        specs.push(ParamSpec::new(format!("{p}.head.b"), [1], Init::Zeros));
        specs
    }

    /// Pre-sigmoid patch scores.
    pub fn logits<'t>(&self, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
        let shape = x.shape();
        match shape[..] {
            [c, h, w] if c == self.channels && h >= 8 && w >= 8 => {}
            _ => {
                return Err(ModelError::ShapeMismatch(format!(
                    "{} expects [{}, >=8, >=8], got {shape:?}",
                    self.prefix, self.channels
                )))
            }
        }
        let p = &self.prefix;
        let mut h = x;
        for i in 0..3 {
            let w = b.get(&format!("{p}.conv{i}.w"))?;
            let bias = b.get(&format!("{p}.conv{i}.b"))?;
            h = h.conv2d(w, Some(bias), 2, 1)?.leaky_relu(self.config.leaky_slope)?;
        }
        Ok(h.conv1x1(b.get(&format!("{p}.head.w"))?, Some(b.get(&format!("{p}.head.b"))?))?)
    }

    pub fn forward<'t>(&self, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
        Ok(self.logits(b, x)?.sigmoid()?)
    }
}

pub fn discriminate<'t>(d: &Discriminator, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
    d.forward(b, x)
}
