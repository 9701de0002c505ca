//! Unpaired adversarial training with alternating generator and
//! discriminator updates.

use std::rc::Rc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nukes_core::gradcore::{adam_step, AdamState, Binder, ParamSet, Tape, Tensor};
use nukes_core::hsicube::HsiCube;
use nukes_core::losses::{
    adversarial_loss, cycle_loss, dcpm_losses, dcpm_sample, non_degraded_loss, total_loss, LossParts, LossTerms,
    CSV_HEADER,
};
use nukes_core::metrics::{MetricReport, SamMode};
use nukes_core::nukesformer::{cycle_pass, NukesFormer, Role};

use crate::config::{Precision, TrainConfig};
use crate::data::{build_datasets, derive_seed, stack_rows, Datasets};
use crate::Result;

const DISCRIMINATORS: [&str; 2] = ["d_h.", "d_r."];

/// State of one training run.
pub struct Trainer {
    pub config: TrainConfig,
    pub model: NukesFormer,
    pub params: ParamSet,
    pub data: Datasets,
    opt_g: AdamState,
    opt_d: AdamState,
    sampler: ChaCha8Rng,
    step: usize,
}

/// Everything a finished run produced.
pub struct TrainOutcome {
    pub model: NukesFormer,
    pub params: ParamSet,
    pub losses: Vec<LossParts>,
    pub init_val: MetricReport,
    pub final_val: MetricReport,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let model = NukesFormer::new(config.model_config())?;
        let mut params = model.init_params(Role::Train, derive_seed(config.seed, "init", 0))?;
        if config.precision == Precision::F32 {
            params.round_to_f32();
        }
        let data = build_datasets(&config.data, config.seed)?;
        let adam = config.adam();
        Ok(Self {
            sampler: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "sampler", 0)),
            opt_g: AdamState::new(adam.clone()),
            opt_d: AdamState::new(adam),
            config,
            model,
            params,
            data,
            step: 0,
        })
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One generator update followed by one discriminator update on the
    /// same pair of samples.
    pub fn step(&mut self) -> Result<LossParts> {
        let xi = self.sampler.random_range(0..self.data.hsi.len());
        let yi = self.sampler.random_range(0..self.data.rgb.len());
        let dcpm_seed = self.sampler.next_u64();
        let xt = self.data.hsi[xi].to_tensor();
        let yt = self.data.rgb[yi].to_tensor();
        let w = &self.config.losses;
        let mut parts = LossParts::default();

        let (fake_x, fake_y) = {
            let tape = Tape::new();
            let b = DISCRIMINATORS
                .iter()
                .fold(Binder::new(&tape, &self.params), |b, d| b.freeze(*d));
            let x = tape.constant(xt.clone());
            let y = tape.constant(yt.clone());
            let out = cycle_pass(&self.model, &b, x, y)?;
            let cyc = cycle_loss(x, y, &out)?;
            let nde = non_degraded_loss(&self.model, &b, x, y)?;
            let adv = adversarial_loss(&self.model, &b, x, y, out.x_fake.image, out.y_fake.image)?;
            let (h, wd) = (self.config.data.height, self.config.data.width);
            let sample = dcpm_sample(h * wd, self.config.dcpm.n_patches, self.config.dcpm.n_negatives, dcpm_seed)?;
            let (spec, geo) = dcpm_losses(&self.model, &b, &out, &sample, &self.config.dcpm)?;
            let terms = LossTerms { cycle: cyc, non_degraded: nde, adversarial: adv.gen, spectral: spec, geometric: geo };
            let total = total_loss(&terms, w)?;
            let item = |v: nukes_core::gradcore::Var| v.value().data()[0];
            parts.cycle = item(cyc);
            parts.non_degraded = item(nde);
            parts.adv_gen = item(adv.gen);
            parts.spectral = item(spec);
            parts.geometric = item(geo);
            let grads = tape.backward(total)?;
            let g = b.grads(&grads);
            adam_step(&mut self.params, &g, &mut self.opt_g)?;
            (out.x_fake.image.value(), out.y_fake.image.value())
        };
        self.round_if_f32();

        {
            let tape = Tape::new();
            let b = Binder::new(&tape, &self.params);
            let x = tape.constant(xt);
            let y = tape.constant(yt);
            let fx = tape.constant(Rc::unwrap_or_clone(fake_x));
            let fy = tape.constant(Rc::unwrap_or_clone(fake_y));
            let adv = adversarial_loss(&self.model, &b, x, y, fx, fy)?;
            parts.adv_disc = adv.disc.value().data()[0];
            let grads = tape.backward(adv.disc.neg()?)?;
            let g = b.grads(&grads);
            adam_step(&mut self.params, &g, &mut self.opt_d)?;
        }
        self.round_if_f32();
        self.step += 1;
        Ok(parts)
    }

    fn round_if_f32(&mut self) {
        if self.config.precision == Precision::F32 {
            self.params.round_to_f32();
        }
    }

    /// Metrics of `G_rh` on the held-out pairs, all scenes stacked into one cube.
    pub fn validate(&self) -> Result<MetricReport> {
        validate(&self.model, &self.params, &self.data)
    }
}

/// Runs `G_rh` without recording gradients.
pub fn reconstruct(model: &NukesFormer, params: &ParamSet, rgb: Tensor) -> Result<HsiCube> {
    let tape = Tape::new();
    let b = Binder::new(&tape, params).freeze("");
    let out = model.g_rh.forward(&b, tape.constant(rgb))?;
    Ok(HsiCube::from_tensor(&out.image.value())?)
}

pub fn validate(model: &NukesFormer, params: &ParamSet, data: &Datasets) -> Result<MetricReport> {
    let mut preds = Vec::with_capacity(data.val.len());
    let mut truth = Vec::with_capacity(data.val.len());
    for (rgb, gt) in &data.val {
        preds.push(reconstruct(model, params, rgb.to_tensor())?);
        truth.push(gt.clone());
    }
    Ok(MetricReport::compute(&stack_rows(&truth)?, &stack_rows(&preds)?, SamMode::Band)?)
}

/// Trains for `config.steps` steps. `progress` sees every step's losses.
pub fn train(config: TrainConfig, mut progress: impl FnMut(usize, &LossParts)) -> Result<TrainOutcome> {
    let mut t = Trainer::new(config)?;
    let init_val = t.validate()?;
    let mut losses = Vec::with_capacity(t.config.steps);
    for s in 1..=t.config.steps {
        let p = t.step()?;
        progress(s, &p);
        losses.push(p);
    }
    let final_val = t.validate()?;
    Ok(TrainOutcome { model: t.model, params: t.params, losses, init_val, final_val })
}

/// Loss log with a header and one row per step, steps counted from 1.
pub fn loss_csv(losses: &[LossParts], config: &TrainConfig) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for (i, p) in losses.iter().enumerate() {
        s.push_str(&p.csv_row(i + 1, &config.losses));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DataConfig;

    pub(crate) fn tiny() -> TrainConfig {
        TrainConfig {
            steps: 2,
            data: DataConfig { hsi_scenes: 2, rgb_scenes: 2, val_scenes: 1, width: 16, height: 16, bands: 6, ..DataConfig::default() },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn one_step_on_16x16() {
        let out = train(TrainConfig { steps: 1, ..tiny() }, |_, _| {}).unwrap();
        assert_eq!(out.losses.len(), 1);
        let p = out.losses[0];
        for v in [p.cycle, p.non_degraded, p.adv_gen, p.spectral, p.geometric] {
            assert!(v.is_finite() && v >= 0.0);
        }
        assert!(p.adv_disc <= 0.0);
        let csv = loss_csv(&out.losses, &tiny());
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("step,L_cyc,L_nde,L_adv_g,L_adv_d,L_spec,L_geo,total\n1,"));
    }

    #[test]
    fn identical_runs_identical_losses() {
        let a = train(tiny(), |_, _| {}).unwrap();
        let b = train(tiny(), |_, _| {}).unwrap();
        assert_eq!(loss_csv(&a.losses, &tiny()), loss_csv(&b.losses, &tiny()));
        assert_eq!(a.params, b.params);
        let c = train(TrainConfig { seed: 1, ..tiny() }, |_, _| {}).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn discriminator_step_touches_only_discriminators() {
        let mut t = Trainer::new(tiny()).unwrap();
        let before = t.params.clone();
        t.step().unwrap();
        for (name, v) in t.params.iter() {
            let changed = v != before.get(name).unwrap();
            if name.starts_with("d_") {
                assert!(changed, "{name}");
            }
        }
        assert!(t.params.get("g_rh.out_map.b").unwrap() != before.get("g_rh.out_map.b").unwrap());
    }

    #[test]
    fn f32_mode_keeps_params_representable() {
        let mut t = Trainer::new(TrainConfig { precision: Precision::F32, ..tiny() }).unwrap();
        t.step().unwrap();
        for (_, v) in t.params.iter() {
            assert!(v.data().iter().all(|x| (*x as f32) as f64 == *x));
        }
    }
}
