use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{shape_err, GradError, ParamSet, Result, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr_init: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Step at which the cosine schedule reaches zero.
    pub horizon: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr_init: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            horizon: 500,
        }
    }
}

/// `lr_init * (1 + cos(pi * t / horizon)) / 2`, held at zero past the horizon.
pub fn cosine_lr(lr_init: f64, t: u64, horizon: u64) -> f64 {
    if horizon == 0 {
        return lr_init;
    }
    let t = t.min(horizon) as f64;
    lr_init * 0.5 * (1.0 + (PI * t / horizon as f64).cos())
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn current_lr(&self) -> f64 {
        cosine_lr(self.config.lr_init, self.step, self.config.horizon)
    }

    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.m.get(name).map(Vec::as_slice)
    }
}

/// One bias-corrected Adam update of every parameter that has a gradient.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &BTreeMap<String, Tensor>,
    state: &mut AdamState,
) -> Result<()> {
    for (name, g) in grads {
        let p = params
            .get(name)
            .ok_or_else(|| GradError::UnknownParam(name.clone()))?;
        if p.shape() != g.shape() {
            return Err(shape_err(
                "adam_step",
                format!("{name}: param {:?}, grad {:?}", p.shape(), g.shape()),
            ));
        }
    }
    let cfg = state.config.clone();
    let lr = state.current_lr();
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (name, g) in grads {
        let p = params.get_mut(name).expect("checked above");
        let n = p.numel();
        let m = state.m.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
        let v = state.v.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
        for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            let mhat = *mv / bc1;
            let vhat = *vv / bc2;
            *pv -= lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
