//! Ablation variants and their comparison table.

use std::fmt;
use std::str::FromStr;

use nukes_core::metrics::MetricReport;
use nukes_core::nukesformer::{count_params, NukesFormer, Role};

use crate::config::TrainConfig;
use crate::train::{train, TrainOutcome};
use crate::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Base,
    /// Uniform fixed knots and unit weights.
    NoNukes,
    /// Spectral attention without the Gabor branch.
    NoGmsa,
    /// Geometric contrastive weight set to zero.
    NoDcpmG,
    /// Spectral contrastive weight set to zero.
    NoDcpmS,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Base, Variant::NoNukes, Variant::NoGmsa, Variant::NoDcpmG, Variant::NoDcpmS];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::NoNukes => "no-nukes",
            Variant::NoGmsa => "no-gmsa",
            Variant::NoDcpmG => "no-dcpm-g",
            Variant::NoDcpmS => "no-dcpm-s",
        }
    }

    /// `cfg` with this variant's component removed.
    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        let mut c = cfg.clone();
        match self {
            Variant::Base => {}
            Variant::NoNukes => c.generator.nukes.adaptive = false,
            Variant::NoGmsa => c.generator.gmsa.use_gabor = false,
            Variant::NoDcpmG => c.losses.geometric = 0.0,
            Variant::NoDcpmS => c.losses.spectral = 0.0,
        }
        c
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| HarnessError::ConfigInvalid(format!("unknown variant `{s}`")))
    }
}

/// One row of the comparison table.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub seed: u64,
    pub params_train: usize,
    pub params_infer: usize,
    pub final_loss: f64,
    pub report: MetricReport,
}

pub const ABLATION_HEADER: &str = "variant,seed,params_train,params_infer,final_total_loss,psnr_db,rmse,mrae,ssim,sam_deg";

impl AblationRow {
    pub fn from_outcome(variant: Variant, cfg: &TrainConfig, out: &TrainOutcome) -> Self {
        Self {
            variant,
            seed: cfg.seed,
            params_train: count_params(&out.model, Role::Train),
            params_infer: count_params(&out.model, Role::Infer),
            final_loss: out.losses.last().map(|p| p.total(&cfg.losses)).unwrap_or(f64::NAN),
            report: out.final_val.clone(),
        }
    }

    pub fn psnr(&self) -> f64 {
        self.report.psnr_db.unwrap_or(f64::INFINITY)
    }

    pub fn csv_row(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.variant,
            self.seed,
            self.params_train,
            self.params_infer,
            self.final_loss,
            self.psnr(),
            r.rmse,
            r.mrae,
            r.ssim_mean,
            r.sam_deg
        )
    }
}

/// Parameter counts of a variant without training it.
pub fn variant_params(variant: Variant, cfg: &TrainConfig) -> Result<(usize, usize)> {
    let m = NukesFormer::new(variant.apply(cfg).model_config())?;
    Ok((count_params(&m, Role::Train), count_params(&m, Role::Infer)))
}

/// Trains every variant on every seed, all with the same step count.
pub fn run_ablation(
    cfg: &TrainConfig,
    variants: &[Variant],
    seeds: &[u64],
    mut on_row: impl FnMut(&AblationRow),
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    for &seed in seeds {
        for &v in variants {
            let c = TrainConfig { seed, ..v.apply(cfg) };
            let out = train(c.clone(), |_, _| {})?;
            let row = AblationRow::from_outcome(v, &c, &out);
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Median validation PSNR of `variant` across the rows.
pub fn median_psnr(rows: &[AblationRow], variant: Variant) -> Option<f64> {
    let mut v: Vec<f64> = rows.iter().filter(|r| r.variant == variant).map(AblationRow::psnr).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from(ABLATION_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}
