use serde::{Deserialize, Serialize};

use super::{ModelError, Result};
use crate::gmsa::{GmsaConfig, NukMsaBlock};
use crate::gradcore::{Binder, Init, ParamSpec, Var};
use crate::nukes::NukesConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    /// Blocks per stage: encoders, bottleneck, decoders. Odd length.
    pub stage_blocks: Vec<usize>,
    pub base_channels: usize,
    pub gmsa: GmsaConfig,
    pub nukes: NukesConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            stage_blocks: vec![1, 1, 2, 1, 1],
            base_channels: 8,
            gmsa: GmsaConfig::default(),
            nukes: NukesConfig::default(),
        }
    }
}

impl GeneratorConfig {
    /// The layout used for the full-size model.
    pub fn full() -> Self {
        Self {
            stage_blocks: vec![1, 2, 4, 2, 1],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_blocks.len() % 2 == 0 {
            return Err(ModelError::InvalidConfig(format!(
                "stage_blocks {:?} must have odd length",
                self.stage_blocks
            )));
        }
        if self.base_channels == 0 {
            return Err(ModelError::InvalidConfig("base_channels must be positive".into()));
        }
        let heads = self.gmsa.heads;
        if heads == 0 || self.base_channels % heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "{heads} heads do not divide {} channels",
                self.base_channels
            )));
        }
        Ok(())
    }

    /// Number of down (and up) sampling steps.
    pub fn depth(&self) -> usize {
        self.stage_blocks.len() / 2
    }
}

/// Output image and decoder-final features of one generator pass.
#[derive(Clone, Copy, Debug)]
pub struct GenOutput<'t> {
    pub image: Var<'t>,
    /// `X_F`: decoder features at full resolution, `[base, H, W]`.
    pub features: Var<'t>,
}

/// One translation direction (`in_channels -> out_channels`).
#[derive(Clone, Debug)]
pub struct Generator {
    pub prefix: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub config: GeneratorConfig,
    /// Parameter prefix of the adapters used by [`Generator::bypass`].
    pub bypass_prefix: String,
    enc: Vec<Vec<NukMsaBlock>>,
    mid: Vec<NukMsaBlock>,
    dec: Vec<Vec<NukMsaBlock>>,
}

impl Generator {
    pub fn new(
        prefix: impl Into<String>,
        bypass_prefix: impl Into<String>,
        in_channels: usize,
        out_channels: usize,
        config: GeneratorConfig,
    ) -> Result<Self> {
        config.validate()?;
        let prefix = prefix.into();
        let s = config.depth();
        let base = config.base_channels;
        let blocks = |stage: &str, n: usize, c: usize| -> Vec<NukMsaBlock> {
            (0..n)
                .map(|j| NukMsaBlock::new(format!("{prefix}.{stage}.{j}"), c, config.gmsa.clone(), config.nukes.clone()))
                .collect()
        };
        let enc = (0..s)
            .map(|i| blocks(&format!("enc{i}"), config.stage_blocks[i], base << i))
            .collect();
        let mid = blocks("mid", config.stage_blocks[s], base << s);
        let dec = (0..s)
            .map(|i| blocks(&format!("dec{i}"), config.stage_blocks[s + 1 + i], base << (s - 1 - i)))
            .collect();
        Ok(Self {
            prefix,
            in_channels,
            out_channels,
            bypass_prefix: bypass_prefix.into(),
            config,
            enc,
            mid,
            dec,
        })
    }

    fn name(&self, s: &str) -> String {
        format!("{}.{s}", self.prefix)
    }

    fn map_specs(name: String, cout: usize, cin: usize) -> [ParamSpec; 2] {
        [
            ParamSpec::new(format!("{name}.w"), [cout, cin], Init::Uniform(1.0 / (cin as f64).sqrt())),
            ParamSpec::new(format!("{name}.b"), [cout], Init::Zeros),
        ]
    }

    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let base = self.config.base_channels;
        let s = self.config.depth();
        let mut specs = Vec::new();
        specs.extend(Self::map_specs(self.name("in_map"), base, self.in_channels));
        for i in 0..s {
            let c = base << i;
            for blk in &self.enc[i] {
                specs.extend(blk.param_specs());
            }
            specs.extend(Self::map_specs(self.name(&format!("down{i}")), 2 * c, c));
        }
        for blk in &self.mid {
            specs.extend(blk.param_specs());
        }
        for i in 0..s {
            let c = base << (s - 1 - i);
            specs.extend(Self::map_specs(self.name(&format!("up{i}")), c, 2 * c));
            specs.extend(Self::map_specs(self.name(&format!("map{i}")), c, 2 * c));
            for blk in &self.dec[i] {
                specs.extend(blk.param_specs());
            }
        }
        specs.extend(Self::map_specs(self.name("out_map"), self.out_channels, base));
        specs
    }

    /// Adapters of the bypass pass, which maps the output domain onto itself.
    pub fn bypass_specs(&self) -> Vec<ParamSpec> {
        let base = self.config.base_channels;
        let c = self.out_channels;
        let mut specs = Vec::new();
        specs.extend(Self::map_specs(format!("{}.in", self.bypass_prefix), base, c));
        specs.extend(Self::map_specs(format!("{}.out", self.bypass_prefix), c, base));
        specs
    }

    fn map<'t>(b: &Binder<'t, '_>, name: &str, x: Var<'t>) -> Result<Var<'t>> {
        Ok(x.conv1x1(b.get(&format!("{name}.w"))?, Some(b.get(&format!("{name}.b"))?))?)
    }

    fn run_blocks<'t>(b: &Binder<'t, '_>, blocks: &[NukMsaBlock], mut x: Var<'t>) -> Result<Var<'t>> {
        for blk in blocks {
            x = blk.forward(b, x)?;
        }
        Ok(x)
    }

    fn check_input(&self, x: Var<'_>, channels: usize) -> Result<(usize, usize)> {
        let shape = x.shape();
        let (c, h, w) = match shape[..] {
            [c, h, w] => (c, h, w),
            _ => return Err(ModelError::ShapeMismatch(format!("expected [C,H,W], got {shape:?}"))),
        };
        if c != channels {
            return Err(ModelError::ShapeMismatch(format!(
                "{} expects {channels} channels, got {c}",
                self.prefix
            )));
        }
        Ok((h, w))
    }

    pub fn forward<'t>(&self, b: &Binder<'t, '_>, x: Var<'t>) -> Result<GenOutput<'t>> {
        let (h, w) = self.check_input(x, self.in_channels)?;
        let s = self.config.depth();
        let factor = 1 << s;
        if h % factor != 0 || w % factor != 0 {
            return Err(ModelError::OddSpatialSize { height: h, width: w, factor });
        }
        let x1 = Self::map(b, &self.name("in_map"), x)?;
        let mut hcur = x1;
        let mut skips = Vec::with_capacity(s);
        for i in 0..s {
            hcur = Self::run_blocks(b, &self.enc[i], hcur)?;
            skips.push(hcur);
            hcur = Self::map(b, &self.name(&format!("down{i}")), hcur.avg_pool2()?)?;
        }
        hcur = Self::run_blocks(b, &self.mid, hcur)?;
        for i in 0..s {
            hcur = Self::map(b, &self.name(&format!("up{i}")), hcur.upsample2()?)?;
            let fused = Var::concat(&[hcur, skips[s - 1 - i]])?;
            hcur = Self::map(b, &self.name(&format!("map{i}")), fused)?;
            hcur = Self::run_blocks(b, &self.dec[i], hcur)?;
        }
        let image = Self::map(b, &self.name("out_map"), hcur.add(x1)?)?;
        Ok(GenOutput { image, features: hcur })
    }

    /// The generator with its resampling removed, run on its own output
    /// domain: `x + out(T(in(x)))` where `T` is the full-resolution encoder
    /// and decoder stages with the outer skip.
    pub fn bypass<'t>(&self, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
        let c = x.shape().first().copied().unwrap_or(0);
        if c != self.out_channels {
            return Err(ModelError::ChannelMismatch(format!(
                "bypass of {} runs on {} channels, got {c}",
                self.prefix, self.out_channels
            )));
        }
        self.check_input(x, self.out_channels)?;
        let s = self.config.depth();
        let h1 = Self::map(b, &format!("{}.in", self.bypass_prefix), x)?;
        let mut hcur = h1;
        if s > 0 {
            hcur = Self::run_blocks(b, &self.enc[0], hcur)?;
            hcur = Self::run_blocks(b, &self.dec[s - 1], hcur)?;
        } else {
            hcur = Self::run_blocks(b, &self.mid, hcur)?;
        }
        let delta = Self::map(b, &format!("{}.out", self.bypass_prefix), hcur.add(h1)?)?;
        Ok(x.add(delta)?)
    }
}

pub fn generator_forward<'t>(g: &Generator, b: &Binder<'t, '_>, x: Var<'t>) -> Result<GenOutput<'t>> {
    g.forward(b, x)
}

pub fn bypass_forward<'t>(g: &Generator, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
    g.bypass(b, x)
}
