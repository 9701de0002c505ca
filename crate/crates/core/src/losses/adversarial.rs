use super::Result;
use crate::gradcore::{Binder, Var};
use crate::nukesformer::NukesFormer;

/// Scores are clamped into `[ADV_EPS, 1 - ADV_EPS]` before the logarithm.
pub const ADV_EPS: f64 = 1e-7;

/// Adversarial terms of one domain, or the sum over both.
#[derive(Clone, Copy, Debug)]
pub struct AdvTerms<'t> {
    /// `-E log D(fake)`, minimized by the generators.
    pub gen: Var<'t>,
    /// `E log D(real) + E log(1 - D(fake))`, maximized by the discriminator.
    pub disc: Var<'t>,
}

fn mean_log<'t>(p: Var<'t>) -> Result<Var<'t>> {
    Ok(p.clamp(ADV_EPS, 1.0 - ADV_EPS)?.log()?.mean()?)
}

/// Terms from patch scores of real and generated samples.
pub fn adversarial_terms<'t>(d_real: Var<'t>, d_fake: Var<'t>) -> Result<AdvTerms<'t>> {
    let disc = mean_log(d_real)?.add(mean_log(d_fake.neg()?.add_const(1.0)?)?)?;
    let gen = mean_log(d_fake)?.neg()?;
    Ok(AdvTerms { gen, disc })
}

/// Sum of the HSI-domain and RGB-domain terms. `fake_x` is `G_rh(y)` and
/// `fake_y` is `G_hr(x)`.
pub fn adversarial_loss<'t>(
    model: &NukesFormer,
    b: &Binder<'t, '_>,
    real_x: Var<'t>,
    real_y: Var<'t>,
    fake_x: Var<'t>,
    fake_y: Var<'t>,
) -> Result<AdvTerms<'t>> {
    let hsi = adversarial_terms(model.d_h.forward(b, real_x)?, model.d_h.forward(b, fake_x)?)?;
    let rgb = adversarial_terms(model.d_r.forward(b, real_y)?, model.d_r.forward(b, fake_y)?)?;
    Ok(AdvTerms { gen: hsi.gen.add(rgb.gen)?, disc: hsi.disc.add(rgb.disc)? })
}
