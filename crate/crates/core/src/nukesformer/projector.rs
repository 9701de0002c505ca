use super::{ModelError, Result};
use crate::gradcore::{Binder, Init, ParamSpec, Var};

/// Two-layer MLP applied per column to `[C, N]` features, GELU in between.
#[derive(Clone, Debug)]
pub struct Projector {
    pub prefix: String,
    pub in_dim: usize,
    pub dim: usize,
}

impl Projector {
    pub fn new(prefix: impl Into<String>, in_dim: usize, dim: usize) -> Self {
        Self { prefix: prefix.into(), in_dim, dim }
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let p = &self.prefix;
        vec![
            ParamSpec::new(format!("{p}.l1.w"), [self.dim, self.in_dim], Init::Uniform(1.0 / (self.in_dim as f64).sqrt())),
            ParamSpec::new(format!("{p}.l1.b"), [self.dim], Init::Zeros),
            ParamSpec::new(format!("{p}.l2.w"), [self.dim, self.dim], Init::Uniform(1.0 / (self.dim as f64).sqrt())),
            ParamSpec::new(format!("{p}.l2.b"), [self.dim], Init::Zeros),
        ]
    }

    pub fn forward<'t>(&self, b: &Binder<'t, '_>, feats: Var<'t>) -> Result<Var<'t>> {
        let shape = feats.shape();
        if shape.len() != 2 || shape[0] != self.in_dim {
            return Err(ModelError::ShapeMismatch(format!(
                "{} expects [{}, N], got {shape:?}",
                self.prefix, self.in_dim
            )));
        }
        let p = &self.prefix;
        let h = feats
            .conv1x1(b.get(&format!("{p}.l1.w"))?, Some(b.get(&format!("{p}.l1.b"))?))?
            .gelu()?;
        Ok(h.conv1x1(b.get(&format!("{p}.l2.w"))?, Some(b.get(&format!("{p}.l2.b"))?))?)
    }
}
