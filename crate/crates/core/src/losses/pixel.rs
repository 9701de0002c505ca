use super::{LossError, Result};
use crate::gradcore::{Binder, Var};
use crate::nukesformer::{CycleOutputs, NukesFormer};

/// Mean squared difference.
pub fn mse<'t>(a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    if a.shape() != b.shape() {
        return Err(LossError::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(a.sub(b)?.square()?.mean()?)
}

/// `mse(G_rh(G_hr(x)), x) + mse(G_hr(G_rh(y)), y)`.
pub fn cycle_loss<'t>(x: Var<'t>, y: Var<'t>, out: &CycleOutputs<'t>) -> Result<Var<'t>> {
    Ok(mse(out.x_rec.image, x)?.add(mse(out.y_rec.image, y)?)?)
}

/// Bypass passes of both generators on their own output domain:
/// `mse(G^_rh(x), x) + mse(G^_hr(y), y)`.
pub fn non_degraded_loss<'t>(model: &NukesFormer, b: &Binder<'t, '_>, x: Var<'t>, y: Var<'t>) -> Result<Var<'t>> {
    let hsi = model.g_rh.bypass(b, x)?;
    let rgb = model.g_hr.bypass(b, y)?;
    Ok(mse(hsi, x)?.add(mse(rgb, y)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::{Tape, Tensor};
    use crate::nukesformer::{cycle_pass, ModelConfig, Role};

    #[test]
    fn mse_examples() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::full([2, 3, 3], 0.4));
        let x1 = tape.constant(Tensor::full([2, 3, 3], 1.4));
        assert!((mse(x1, x).unwrap().value().item().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(mse(x, x).unwrap().value().item().unwrap(), 0.0);
        let other = tape.constant(Tensor::zeros([2, 9]));
        assert!(matches!(mse(x, other), Err(LossError::ShapeMismatch(_))));
    }

    #[test]
    fn non_degraded_examples() {
        let m = NukesFormer::new(ModelConfig { bands: 5, ..ModelConfig::default() }).unwrap();
        let mut ps = m.init_params(Role::Train, 0).unwrap();
        let tape = Tape::new();
        let x = tape.constant(Tensor::full([5, 4, 4], 1.0));
        let y = tape.constant(Tensor::full([3, 4, 4], 1.0));
        {
            let b = Binder::new(&tape, &ps);
            let l = non_degraded_loss(&m, &b, x, y).unwrap().value().item().unwrap();
            // sum of the two single-generator terms
            let a = mse(m.g_rh.bypass(&b, x).unwrap(), x).unwrap().value().item().unwrap();
            let c = mse(m.g_hr.bypass(&b, y).unwrap(), y).unwrap().value().item().unwrap();
            assert!((l - (a + c)).abs() < 1e-15);
            assert!(l > 0.0);
        }
        ps.get_mut("nde_rh.out.w").unwrap().data_mut().fill(0.0);
        ps.get_mut("nde_hr.out.w").unwrap().data_mut().fill(0.0);
        let b = Binder::new(&tape, &ps);
        assert_eq!(non_degraded_loss(&m, &b, x, y).unwrap().value().item().unwrap(), 0.0);
        // G^(x) = 2x on unit input: out.b = 1 with zero weights
        ps.get_mut("nde_rh.out.b").unwrap().data_mut().fill(1.0);
        let b = Binder::new(&tape, &ps);
        let hsi = m.g_rh.bypass(&b, x).unwrap();
        assert_eq!(mse(hsi, x).unwrap().value().item().unwrap(), 1.0);
    }

    #[test]
    fn cycle_loss_is_sum_of_both_cycles() {
        let m = NukesFormer::new(ModelConfig { bands: 5, ..ModelConfig::default() }).unwrap();
        let ps = m.init_params(Role::Train, 0).unwrap();
        let tape = Tape::new();
        let b = Binder::new(&tape, &ps);
        let x = tape.constant(Tensor::from_fn([5, 8, 8], |i| (i % 7) as f64 / 7.0));
        let y = tape.constant(Tensor::from_fn([3, 8, 8], |i| (i % 5) as f64 / 5.0));
        let out = cycle_pass(&m, &b, x, y).unwrap();
        let l = cycle_loss(x, y, &out).unwrap().value().item().unwrap();
        let want = mse(out.x_rec.image, x).unwrap().value().item().unwrap()
            + mse(out.y_rec.image, y).unwrap().value().item().unwrap();
        assert_eq!(l, want);
    }
}
