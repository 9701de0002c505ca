use serde::{Deserialize, Serialize};

use super::{LossError, Result};
use crate::gradcore::Var;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub cycle: f64,
    pub non_degraded: f64,
    pub adversarial: f64,
    pub spectral: f64,
    pub geometric: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { cycle: 1.0, non_degraded: 0.5, adversarial: 1.0, spectral: 0.25, geometric: 0.25 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.cycle, self.non_degraded, self.adversarial, self.spectral, self.geometric];
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(LossError::InvalidParam(format!("loss weights must be finite and >= 0: {w:?}")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 5] {
        [self.cycle, self.non_degraded, self.adversarial, self.spectral, self.geometric]
    }
}

/// Generator-side loss terms on a tape. `adversarial` is the generator term.
#[derive(Clone, Copy, Debug)]
pub struct LossTerms<'t> {
    pub cycle: Var<'t>,
    pub non_degraded: Var<'t>,
    pub adversarial: Var<'t>,
    pub spectral: Var<'t>,
    pub geometric: Var<'t>,
}

/// Weighted sum of the generator-side terms. Terms with zero weight are left
/// out of the graph.
pub fn total_loss<'t>(t: &LossTerms<'t>, w: &LossWeights) -> Result<Var<'t>> {
    let parts = [t.cycle, t.non_degraded, t.adversarial, t.spectral, t.geometric];
    let mut acc: Option<Var<'t>> = None;
    for (v, wt) in parts.into_iter().zip(w.as_array()) {
        if wt == 0.0 {
            continue;
        }
        let term = v.scale(wt)?;
        acc = Some(match acc {
            Some(a) => a.add(term)?,
            None => term,
        });
    }
    match acc {
        Some(a) => Ok(a),
        None => Ok(t.cycle.scale(0.0)?),
    }
}

pub const CSV_HEADER: &str = "step,L_cyc,L_nde,L_adv_g,L_adv_d,L_spec,L_geo,total";

/// Logged values of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub cycle: f64,
    pub non_degraded: f64,
    pub adv_gen: f64,
    /// Discriminator objective as maximized by the discriminators.
    pub adv_disc: f64,
    pub spectral: f64,
    pub geometric: f64,
}

impl LossParts {
    /// The generator objective, same weighting as [`total_loss`].
    pub fn total(&self, w: &LossWeights) -> f64 {
        let v = [self.cycle, self.non_degraded, self.adv_gen, self.spectral, self.geometric];
        v.iter().zip(w.as_array()).map(|(a, b)| a * b).sum()
    }

    /// One CSV row matching [`CSV_HEADER`]. Values use the shortest exact
    /// decimal form, so rows are reproducible byte for byte.
    pub fn csv_row(&self, step: usize, w: &LossWeights) -> String {
        format!(
            "{step},{},{},{},{},{},{},{}",
            self.cycle,
            self.non_degraded,
            self.adv_gen,
            self.adv_disc,
            self.spectral,
            self.geometric,
            self.total(w)
        )
    }
}
