use serde::{Deserialize, Serialize};

use super::gabor::{gabor_branch, gabor_kernels, GaborConfig};
use super::msa::{spectral_msa_with_attention, AttnScale, MsaParams};
use super::{GmsaError, Result};
use crate::gradcore::{Binder, Init, ParamSpec, Var};
use crate::nukes::{NukesConfig, NukesLayer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmsaConfig {
    pub heads: usize,
    pub attn_scale: AttnScale,
    pub gabor: GaborConfig,
    /// When false only the attention branch is used.
    pub use_gabor: bool,
}

impl Default for GmsaConfig {
    fn default() -> Self {
        Self {
            heads: 1,
            attn_scale: AttnScale::default(),
            gabor: GaborConfig::default(),
            use_gabor: true,
        }
    }
}

/// softplus^-1(1): frequencies start at 1.
const FREQ_BIAS_INIT: f64 = 0.541_324_854_612_918_1;

/// Spectral attention plus dynamic Gabor branch, fused by addition.
#[derive(Clone, Debug)]
pub struct Gmsa {
    pub prefix: String,
    pub channels: usize,
    pub config: GmsaConfig,
}

/// The two branch outputs of [`Gmsa`] before fusion.
pub struct GmsaParts<'t> {
    pub msa: Var<'t>,
    pub gabor: Option<Var<'t>>,
    pub freqs: Option<Var<'t>>,
}

impl Gmsa {
    pub fn new(prefix: impl Into<String>, channels: usize, config: GmsaConfig) -> Self {
        Self {
            prefix: prefix.into(),
            channels,
            config,
        }
    }

    fn name(&self, s: &str) -> String {
        format!("{}.{s}", self.prefix)
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let c = self.channels;
        let a = 1.0 / (c as f64).sqrt();
        let mut specs = vec![
            ParamSpec::new(self.name("wq"), [c, c], Init::Uniform(a)),
            ParamSpec::new(self.name("wk"), [c, c], Init::Uniform(a)),
            ParamSpec::new(self.name("wv"), [c, c], Init::Uniform(a)),
        ];
        if self.config.use_gabor {
            let m = self.config.gabor.kernels;
            specs.extend([
                ParamSpec::new(self.name("gabor.wf"), [m, c], Init::Uniform(0.1)),
                ParamSpec::new(self.name("gabor.bf"), [m], Init::Const(FREQ_BIAS_INIT)),
                ParamSpec::new(
                    self.name("gabor.theta"),
                    [m],
                    Init::Values((0..m).map(|j| std::f64::consts::PI * j as f64 / m as f64).collect()),
                ),
                ParamSpec::new(self.name("gabor.wo"), [c, c * m], Init::Uniform(1.0 / ((c * m) as f64).sqrt())),
                ParamSpec::new(self.name("gabor.bo"), [c], Init::Zeros),
            ]);
        }
        specs
    }

    pub fn forward_parts<'t>(&self, b: &Binder<'t, '_>, x: Var<'t>) -> Result<GmsaParts<'t>> {
        if x.shape().first() != Some(&self.channels) {
            return Err(GmsaError::ShapeMismatch(format!(
                "gmsa has {} channels, input {:?}",
                self.channels,
                x.shape()
            )));
        }
        let p = MsaParams {
            wq: b.get(&self.name("wq"))?,
            wk: b.get(&self.name("wk"))?,
            wv: b.get(&self.name("wv"))?,
            heads: self.config.heads,
            scale: self.config.attn_scale,
        };
        let msa = spectral_msa_with_attention(x, &p)?;
        if !self.config.use_gabor {
            return Ok(GmsaParts {
                msa: msa.out,
                gabor: None,
                freqs: None,
            });
        }
        // frequencies predicted from global context
        let ctx = x.global_avg_pool()?;
        let freqs = ctx
            .conv1x1(b.get(&self.name("gabor.wf"))?, Some(b.get(&self.name("gabor.bf"))?))?
            .softplus()?;
        let kernels = gabor_kernels(freqs, b.get(&self.name("gabor.theta"))?, &self.config.gabor)?;
        let g = gabor_branch(
            msa.v,
            kernels,
            b.get(&self.name("gabor.wo"))?,
            b.get(&self.name("gabor.bo"))?,
        )?;
        Ok(GmsaParts {
            msa: msa.out,
            gabor: Some(g),
            freqs: Some(freqs),
        })
    }

    pub fn forward<'t>(&self, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
        let parts = self.forward_parts(b, x)?;
        match parts.gabor {
            Some(g) => Ok(parts.msa.add(g)?),
            None => Ok(parts.msa),
        }
    }
}

pub fn gmsa_forward<'t>(gmsa: &Gmsa, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
    gmsa.forward(b, x)
}

pub const LN_EPS: f64 = 1e-5;

/// Pre-norm residual block: `y = x + gmsa(LN(x))`, `out = y + ffn(LN(y))`.
#[derive(Clone, Debug)]
pub struct NukMsaBlock {
    pub prefix: String,
    pub channels: usize,
    pub gmsa: Gmsa,
    pub ffn: NukesLayer,
}

impl NukMsaBlock {
    pub fn new(prefix: impl Into<String>, channels: usize, gmsa: GmsaConfig, nukes: NukesConfig) -> Self {
        let prefix = prefix.into();
        Self {
            gmsa: Gmsa::new(format!("{prefix}.gmsa"), channels, gmsa),
            ffn: NukesLayer::new(format!("{prefix}.ffn"), channels, nukes),
            prefix,
            channels,
        }
    }

    fn name(&self, s: &str) -> String {
        format!("{}.{s}", self.prefix)
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let c = self.channels;
        let mut specs = Vec::new();
        for ln in ["ln1", "ln2"] {
            specs.push(ParamSpec::new(self.name(&format!("{ln}.g")), [c], Init::Const(1.0)));
            specs.push(ParamSpec::new(self.name(&format!("{ln}.b")), [c], Init::Zeros));
        }
        specs.extend(self.gmsa.param_specs());
        specs.extend(self.ffn.param_specs());
        specs
    }

    pub fn forward<'t>(&self, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
        let n1 = x.layer_norm(b.get(&self.name("ln1.g"))?, b.get(&self.name("ln1.b"))?, LN_EPS)?;
        let y = x.add(self.gmsa.forward(b, n1)?)?;
        let n2 = y.layer_norm(b.get(&self.name("ln2.g"))?, b.get(&self.name("ln2.b"))?, LN_EPS)?;
        Ok(y.add(self.ffn.forward(b, n2)?)?)
    }
}

pub fn nuk_msa_block<'t>(block: &NukMsaBlock, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
    block.forward(b, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::{grad_check_many, CheckOptions, ParamSet, Tape, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rnd(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0))
    }

    fn small_gmsa() -> GmsaConfig {
        GmsaConfig {
            gabor: GaborConfig { kernels: 2, size: 3, ..GaborConfig::default() },
            ..GmsaConfig::default()
        }
    }

    #[test]
    fn zero_output_map_gives_msa_alone() {
        let g = Gmsa::new("g", 4, small_gmsa());
        let mut ps = ParamSet::from_specs(&g.param_specs(), 0).unwrap();
        ps.get_mut("g.gabor.wo").unwrap().data_mut().fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tape = Tape::new();
        let b = Binder::new(&tape, &ps);
        let x = tape.constant(rnd(&mut rng, &[4, 3, 3]));
        let parts = g.forward_parts(&b, x).unwrap();
        let full = g.forward(&b, x).unwrap();
        assert_eq!(full.value().data(), parts.msa.value().data());
    }

    #[test]
    fn fusion_is_additive() {
        let g = Gmsa::new("g", 4, small_gmsa());
        let ps = ParamSet::from_specs(&g.param_specs(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tape = Tape::new();
        let b = Binder::new(&tape, &ps);
        let x = tape.constant(rnd(&mut rng, &[4, 3, 3]));
        let parts = g.forward_parts(&b, x).unwrap();
        let full = g.forward(&b, x).unwrap().value();
        let (m, gb) = (parts.msa.value(), parts.gabor.unwrap().value());
        for i in 0..full.numel() {
            assert!((full.data()[i] - m.data()[i] - gb.data()[i]).abs() < 1e-15);
        }
    }

    fn check_params<F>(specs: &[ParamSpec], seed: u64, x_shape: &[usize], f: F)
    where
        F: for<'t> Fn(&Binder<'t, '_>, Var<'t>) -> Result<Var<'t>>,
    {
        let mut ps = ParamSet::from_specs(specs, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
        for (_, t) in ps.iter_mut() {
            for v in t.data_mut() {
                *v += rng.random_range(-0.1..0.1);
            }
        }
        let names: Vec<String> = ps.names().cloned().collect();
        let mut inputs = vec![rnd(&mut rng, x_shape)];
        inputs.extend(names.iter().map(|n| ps.get(n).unwrap().clone()));
        let weights = rnd(&mut rng, x_shape);
        let rep = grad_check_many(
            |tape, v| -> Result<Var> {
                let b = Binder::new(tape, &ps);
                for (n, var) in names.iter().zip(&v[1..]) {
                    b.bind(n.clone(), *var);
                }
                let w = tape.constant(weights.clone());
                Ok(f(&b, v[0])?.mul(w)?.sum()?)
            },
            &inputs,
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(rep.passed(), "{:?}", rep.worst().map(|c| (names.get(c.input.wrapping_sub(1)), c)));
    }

    #[test]
    fn gmsa_gradients() {
        let g = Gmsa::new("g", 4, small_gmsa());
        check_params(&g.param_specs(), 2, &[4, 4, 4], |b, x| g.forward(b, x));
    }

    #[test]
    fn block_gradients() {
        let blk = NukMsaBlock::new("blk", 4, small_gmsa(), NukesConfig::default());
        check_params(&blk.param_specs(), 3, &[4, 4, 4], |b, x| blk.forward(b, x));
    }

    #[test]
    fn zero_weights_block_is_identity() {
        let blk = NukMsaBlock::new("blk", 4, GmsaConfig::default(), NukesConfig::default());
        let mut ps = ParamSet::from_specs(&blk.param_specs(), 0).unwrap();
        for (name, t) in ps.iter_mut() {
            // keep the spline geometry valid; zero every map
            if !name.ends_with("knot_raw") {
                t.data_mut().fill(0.0);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tape = Tape::new();
        let b = Binder::new(&tape, &ps);
        let xt = rnd(&mut rng, &[4, 4, 4]);
        let y = blk.forward(&b, tape.constant(xt.clone())).unwrap();
        assert_eq!(y.shape(), vec![4, 4, 4]);
        assert!(y.value().max_abs_diff(&xt) < 1e-12);
    }

    #[test]
    fn channel_mismatch() {
        let blk = NukMsaBlock::new("blk", 4, small_gmsa(), NukesConfig::default());
        let ps = ParamSet::from_specs(&blk.param_specs(), 0).unwrap();
        let tape = Tape::new();
        let b = Binder::new(&tape, &ps);
        assert!(blk.forward(&b, tape.constant(Tensor::zeros([3, 4, 4]))).is_err());
    }
}
