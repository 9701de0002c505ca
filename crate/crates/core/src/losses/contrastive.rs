use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LossError, Result};
use crate::gradcore::{Binder, Tensor, Var};
use crate::nukesformer::{CycleOutputs, GenOutput, NukesFormer, Projector};

/// Which code matrix a patch code comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    /// The query side.
    A,
    /// The positive side.
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PatchRef {
    pub domain: Domain,
    /// Column of the code matrix.
    pub slot: usize,
}

/// One InfoNCE term: query `A[:, slot]`, positive `B[:, slot]`, negatives
/// anywhere else.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchCodeSet {
    pub slot: usize,
    pub negatives: Vec<PatchRef>,
}

/// Similarity kernel of a contrastive term, as its logit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    /// `exp(-angle / tau)` with the spectral angle in radians.
    Spectral { tau: f64 },
    /// `exp(cos / tau)`.
    Geometric { tau: f64 },
}

impl Kernel {
    fn tau(self) -> f64 {
        match self {
            Kernel::Spectral { tau } | Kernel::Geometric { tau } => tau,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcpmConfig {
    pub n_patches: usize,
    pub n_negatives: usize,
    pub tau_spectral: f64,
    pub tau_geometric: f64,
}

impl Default for DcpmConfig {
    fn default() -> Self {
        Self { n_patches: 64, n_negatives: 15, tau_spectral: 0.5, tau_geometric: 0.07 }
    }
}

/// Sampled spatial positions and the InfoNCE terms built on them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DcpmSample {
    /// Spatial index (row-major pixel) of each slot.
    pub positions: Vec<usize>,
    pub sets: Vec<PatchCodeSet>,
}

impl DcpmSample {
    pub fn position(&self, r: PatchRef) -> usize {
        self.positions[r.slot]
    }
}

/// Draws `n_patches` distinct positions out of `available`, and for each one
/// `n_negatives` codes from the other sampled positions of both domains.
pub fn dcpm_sample(available: usize, n_patches: usize, n_negatives: usize, seed: u64) -> Result<DcpmSample> {
    if n_patches == 0 || available < n_patches {
        return Err(LossError::TooFewPatches { available, requested: n_patches });
    }
    let pool = 2 * (n_patches - 1);
    if n_negatives > pool {
        return Err(LossError::TooFewPatches { available: pool, requested: n_negatives });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = sample(&mut rng, available, n_patches).into_vec();
    let sets = (0..n_patches)
        .map(|slot| {
            let negatives = sample(&mut rng, pool, n_negatives)
                .into_iter()
                .map(|k| {
                    let (domain, other) = if k < n_patches - 1 { (Domain::A, k) } else { (Domain::B, k - (n_patches - 1)) };
                    // skip the query's own slot
                    let slot = if other >= slot { other + 1 } else { other };
                    PatchRef { domain, slot }
                })
                .collect();
            PatchCodeSet { slot, negatives }
        })
        .collect();
    Ok(DcpmSample { positions, sets })
}

/// Scales each column of `[D, P]` to unit length.
fn unit_columns<'t>(x: Var<'t>) -> Result<Var<'t>> {
    let xv = x.value();
    let (d, p) = xv.dims2()?;
    for j in 0..p {
        if (0..d).all(|i| xv.data()[i * p + j] == 0.0) {
            return Err(LossError::ZeroVector);
        }
    }
    let tape = x.tape();
    let ones_row = tape.constant(Tensor::full([1, d], 1.0));
    let ones_col = tape.constant(Tensor::full([d, 1], 1.0));
    let inv = ones_row.matmul(x.square()?)?.pow(-0.5)?;
    Ok(x.mul(ones_col.matmul(inv)?)?)
}

/// Column-wise dot products of two `[D, P]` matrices, as `[1, P]`.
fn column_dots<'t>(a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    let d = a.shape()[0];
    let ones = a.tape().constant(Tensor::full([1, d], 1.0));
    Ok(ones.matmul(a.mul(b)?)?)
}

/// Mean InfoNCE over `sets`. `codes_a` and `codes_b` are `[D, P]`; set `i`
/// contrasts `A[:, slot]` against `B[:, slot]` and its negatives. Every set
/// must carry the same number of negatives.
pub fn contrastive_loss<'t>(codes_a: Var<'t>, codes_b: Var<'t>, sets: &[PatchCodeSet], kernel: Kernel) -> Result<Var<'t>> {
    let (sa, sb) = (codes_a.shape(), codes_b.shape());
    if sa.len() != 2 || sa != sb {
        return Err(LossError::ShapeMismatch(format!("codes {sa:?} vs {sb:?}")));
    }
    let tau = kernel.tau();
    if !(tau > 0.0) {
        return Err(LossError::InvalidParam(format!("temperature {tau}")));
    }
    if sets.is_empty() {
        return Err(LossError::TooFewPatches { available: 0, requested: 1 });
    }
    let p = sa[1];
    let n = sets[0].negatives.len();
    for s in sets {
        if s.negatives.len() != n {
            return Err(LossError::ShapeMismatch("ragged negative lists".into()));
        }
        if s.slot >= p || s.negatives.iter().any(|r| r.slot >= p) {
            return Err(LossError::ShapeMismatch(format!("slot out of range for {p} codes")));
        }
    }
    let tape = codes_a.tape();
    if n == 0 {
        // -log(1) for every set; keep the dependence on the codes for shape checks
        unit_columns(codes_a)?;
        unit_columns(codes_b)?;
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let ua = unit_columns(codes_a)?;
    let ub = unit_columns(codes_b)?;
    let m = sets.len();
    let queries: Vec<usize> = sets.iter().map(|s| s.slot).collect();
    let q = ua.select_cols(&queries)?;
    let pos = column_dots(q, ub.select_cols(&queries)?)?;
    // all codes side by side: A columns then B columns
    let both = Var::concat(&[ua.transpose()?, ub.transpose()?])?.transpose()?;
    let neg_cols: Vec<usize> = (0..n)
        .flat_map(|k| {
            sets.iter().map(move |s| {
                let r = s.negatives[k];
                match r.domain {
                    Domain::A => r.slot,
                    Domain::B => p + r.slot,
                }
            })
        })
        .collect();
    let q_rep: Vec<usize> = (0..n).flat_map(|_| queries.iter().copied()).collect();
    let neg = column_dots(ua.select_cols(&q_rep)?, both.select_cols(&neg_cols)?)?.reshape(&[n, m])?;
    let cos = Var::concat(&[pos, neg])?;
    let logits = match kernel {
        Kernel::Spectral { tau } => cos.acos()?.scale(-1.0 / tau)?,
        Kernel::Geometric { tau } => cos.scale(1.0 / tau)?,
    };
    let prob = logits.softmax(0)?.slice(0, 1)?;
    Ok(prob.log()?.mean()?.neg()?)
}

fn single<'t>(f: Var<'t>, f_pos: Var<'t>, negatives: &[Var<'t>], kernel: Kernel) -> Result<Var<'t>> {
    let d = f.value().numel();
    let col = |v: Var<'t>| -> Result<Var<'t>> {
        if v.value().numel() != d {
            return Err(LossError::ShapeMismatch(format!("code lengths {d} and {}", v.value().numel())));
        }
        Ok(v.reshape(&[1, d])?)
    };
    let a = col(f)?.transpose()?;
    let mut rows = vec![col(f_pos)?];
    for &v in negatives {
        rows.push(col(v)?);
    }
    let b = Var::concat(&rows)?.transpose()?;
    // pad A to B's width so both share one slot space
    let a = if negatives.is_empty() {
        a
    } else {
        let idx = vec![0; negatives.len() + 1];
        a.select_cols(&idx)?
    };
    let set = PatchCodeSet {
        slot: 0,
        negatives: (1..=negatives.len()).map(|slot| PatchRef { domain: Domain::B, slot }).collect(),
    };
    contrastive_loss(a, b, &[set], kernel)
}

/// InfoNCE of one query with the spectral-angle kernel.
pub fn spectral_contrastive<'t>(f: Var<'t>, f_pos: Var<'t>, negatives: &[Var<'t>], tau: f64) -> Result<Var<'t>> {
    single(f, f_pos, negatives, Kernel::Spectral { tau })
}

/// InfoNCE of one query with the cosine kernel.
pub fn geometric_contrastive<'t>(f: Var<'t>, f_pos: Var<'t>, negatives: &[Var<'t>], tau: f64) -> Result<Var<'t>> {
    single(f, f_pos, negatives, Kernel::Geometric { tau })
}

fn project<'t>(proj: &Projector, b: &Binder<'t, '_>, g: &GenOutput<'t>, positions: &[usize]) -> Result<Var<'t>> {
    let shape = g.features.shape();
    let (c, hw) = (shape[0], shape[1..].iter().product());
    let cols = g.features.reshape(&[c, hw])?.select_cols(positions)?;
    Ok(proj.forward(b, cols)?)
}

/// `(L_spec, L_geo)` for one cycle pass.
///
/// The spectral term contrasts `F_A` codes of `G_hr(x)` against `F_B` codes of
/// `G_rh(G_hr(x))`; the geometric term contrasts `F_B` codes of `G_rh(y)`
/// against `F_A` codes of `G_hr(G_rh(y))`.
pub fn dcpm_losses<'t>(
    model: &NukesFormer,
    b: &Binder<'t, '_>,
    out: &CycleOutputs<'t>,
    sample: &DcpmSample,
    cfg: &DcpmConfig,
) -> Result<(Var<'t>, Var<'t>)> {
    let pos = &sample.positions;
    let spec = contrastive_loss(
        project(&model.f_a, b, &out.y_fake, pos)?,
        project(&model.f_b, b, &out.x_rec, pos)?,
        &sample.sets,
        Kernel::Spectral { tau: cfg.tau_spectral },
    )?;
    let geo = contrastive_loss(
        project(&model.f_b, b, &out.x_fake, pos)?,
        project(&model.f_a, b, &out.y_rec, pos)?,
        &sample.sets,
        Kernel::Geometric { tau: cfg.tau_geometric },
    )?;
    Ok((spec, geo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::{grad_check_many, CheckOptions, Tape};
    use rand::{Rng, SeedableRng};
    use std::collections::HashSet;

    fn v<'t>(tape: &'t Tape, data: &[f64]) -> Var<'t> {
        tape.constant(Tensor::new([data.len()], data.to_vec()).unwrap())
    }

    fn val(x: Result<Var>) -> f64 {
        x.unwrap().value().item().unwrap()
    }

    #[test]
    fn scalar_examples() {
        let tape = Tape::new();
        let f = v(&tape, &[1.0, 0.0, 0.0]);
        let orth = v(&tape, &[0.0, 2.0, 0.0]);
        let got = val(spectral_contrastive(f, f, &[orth], 1.0));
        let want = -(1.0 / (1.0 + (-std::f64::consts::FRAC_PI_2).exp())).ln();
        assert!((got - want).abs() < 1e-12 && (got - 0.1889).abs() < 1e-4);
        let negf = v(&tape, &[-1.0, 0.0, 0.0]);
        let got = val(geometric_contrastive(f, f, &[negf], 1.0));
        let e = std::f64::consts::E;
        assert!((got - -(e / (e + 1.0 / e)).ln()).abs() < 1e-12 && (got - 0.1269).abs() < 1e-4);
        assert_eq!(val(spectral_contrastive(f, orth, &[], 0.5)), 0.0);
        assert_eq!(val(geometric_contrastive(f, orth, &[], 0.07)), 0.0);
    }

    #[test]
    fn equal_similarity_gives_log_n_plus_one() {
        let tape = Tape::new();
        let f = v(&tape, &[1.0, 0.0, 0.0, 0.0, 0.0]);
        let others: Vec<Var> = (1..5)
            .map(|i| {
                let mut d = vec![0.0; 5];
                d[i] = 1.0 + i as f64;
                v(&tape, &d)
            })
            .collect();
        for k in [Kernel::Spectral { tau: 0.5 }, Kernel::Geometric { tau: 0.07 }] {
            let got = val(single(f, others[0], &others[1..], k));
            assert!((got - 4f64.ln()).abs() < 1e-9, "{k:?} {got}");
        }
    }

    #[test]
    fn scale_invariant_and_zero_rejected() {
        let tape = Tape::new();
        let f = v(&tape, &[0.3, -1.0, 0.5]);
        let p = v(&tape, &[0.2, -0.7, 0.9]);
        let n1 = v(&tape, &[1.0, 0.1, 0.0]);
        let n1s = v(&tape, &[3.0, 0.3, 0.0]);
        let a = val(geometric_contrastive(f, p, &[n1], 0.07));
        let b = val(geometric_contrastive(f, p, &[n1s], 0.07));
        assert!((a - b).abs() < 1e-12);
        let z = v(&tape, &[0.0; 3]);
        assert!(matches!(spectral_contrastive(f, p, &[z], 0.5), Err(LossError::ZeroVector)));
    }

    #[test]
    fn monotone_in_similarities() {
        let tape = Tape::new();
        let f = v(&tape, &[1.0, 0.0]);
        let pos = v(&tape, &[1.0, 0.3]);
        for k in [Kernel::Spectral { tau: 0.5 }, Kernel::Geometric { tau: 0.3 }] {
            let mut prev = 0.0;
            // negative rotating toward the query
            for (i, ang) in [2.5f64, 1.5, 0.8, 0.2].iter().enumerate() {
                let neg = v(&tape, &[ang.cos(), ang.sin()]);
                let l = val(single(f, pos, &[neg], k));
                assert!(i == 0 || l > prev);
                prev = l;
            }
            let neg = v(&tape, &[0.0, -1.0]);
            let mut prev = f64::INFINITY;
            for ang in [1.2f64, 0.6, 0.1] {
                let pp = v(&tape, &[ang.cos(), ang.sin()]);
                let l = val(single(f, pp, &[neg], k));
                assert!(l < prev);
                prev = l;
            }
        }
    }

    #[test]
    fn sampler_contract() {
        let s = dcpm_sample(64, 16, 9, 3).unwrap();
        assert_eq!(s, dcpm_sample(64, 16, 9, 3).unwrap());
        assert_ne!(s, dcpm_sample(64, 16, 9, 4).unwrap());
        assert_eq!(s.positions.iter().collect::<HashSet<_>>().len(), 16);
        for set in &s.sets {
            assert_eq!(set.negatives.len(), 9);
            assert_eq!(set.negatives.iter().collect::<HashSet<_>>().len(), 9);
            for &r in &set.negatives {
                assert_ne!(s.position(r), s.positions[set.slot]);
            }
        }
        let both: HashSet<Domain> = s.sets.iter().flat_map(|x| x.negatives.iter().map(|r| r.domain)).collect();
        assert_eq!(both.len(), 2);
        let empty = dcpm_sample(64, 4, 0, 1).unwrap();
        assert!(empty.sets.iter().all(|x| x.negatives.is_empty()));
        assert!(matches!(dcpm_sample(8, 9, 1, 0), Err(LossError::TooFewPatches { .. })));
        assert!(matches!(dcpm_sample(64, 4, 7, 0), Err(LossError::TooFewPatches { .. })));
    }

    #[test]
    fn batched_matches_single_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (d, p) = (5, 6);
        let at = Tensor::from_fn([d, p], |_| rng.random_range(-1.0..1.0));
        let bt = Tensor::from_fn([d, p], |_| rng.random_range(-1.0..1.0));
        let s = dcpm_sample(p, p, 3, 8).unwrap();
        let col = |t: &Tensor, j: usize| -> Vec<f64> { (0..d).map(|i| t.data()[i * p + j]).collect() };
        for k in [Kernel::Spectral { tau: 0.5 }, Kernel::Geometric { tau: 0.07 }] {
            let tape = Tape::new();
            let got = val(contrastive_loss(tape.constant(at.clone()), tape.constant(bt.clone()), &s.sets, k));
            let mut want = 0.0;
            for set in &s.sets {
                let negs: Vec<Var> = set
                    .negatives
                    .iter()
                    .map(|r| v(&tape, &col(if r.domain == Domain::A { &at } else { &bt }, r.slot)))
                    .collect();
                want += val(single(v(&tape, &col(&at, set.slot)), v(&tape, &col(&bt, set.slot)), &negs, k));
            }
            assert!((got - want / p as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (d, p) = (4, 5);
        let inputs = [
            Tensor::from_fn([d, p], |_| rng.random_range(-1.0..1.0)),
            Tensor::from_fn([d, p], |_| rng.random_range(-1.0..1.0)),
        ];
        let s = dcpm_sample(p, p, 4, 2).unwrap();
        for k in [Kernel::Spectral { tau: 0.5 }, Kernel::Geometric { tau: 0.2 }] {
            let rep = grad_check_many(
                |_, v| contrastive_loss(v[0], v[1], &s.sets, k),
                &inputs,
                &CheckOptions::default(),
            )
            .unwrap();
            assert!(rep.passed(), "{k:?} {:?}", rep.worst());
        }
    }
}
