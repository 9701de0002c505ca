//! The gated spline feed-forward block and its two custom tape ops.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::basis::{eval_span_row_into, find_span, span_matrix};
use super::deriv::span_matrix_jacobian;
use super::ncpg::{greville, knot_jacobian, ncpg_knots, uniform_knots, NcpgConfig};
use super::spline::SplineSpec;
use super::{NukesError, Result};
use crate::gradcore::{Binder, Init, ParamSet, ParamSpec, Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NukesConfig {
    pub spline: NcpgConfig,
    /// Learnable knots and weights. When false the layer is a conventional
    /// KAN: uniform fixed knots and unit weights.
    pub adaptive: bool,
}

impl Default for NukesConfig {
    fn default() -> Self {
        Self {
            spline: NcpgConfig::default(),
            adaptive: true,
        }
    }
}

fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).expect("op produced a consistent shape")
}

/// Per-channel spline geometry resolved from the raw parameters.
struct ChannelSplines {
    knots: Vec<Vec<f64>>,
    weights: Vec<Vec<f64>>,
}

fn resolve(
    c: usize,
    cfg: &NcpgConfig,
    knot_raw: Option<&Tensor>,
    log_w: Option<&Tensor>,
) -> Result<ChannelSplines> {
    let n = cfg.n_basis();
    let k = cfg.n_increments();
    let knots = match knot_raw {
        Some(raw) => (0..c)
            .map(|ch| ncpg_knots(&raw.data()[ch * k..(ch + 1) * k], cfg))
            .collect::<Result<_>>()?,
        None => vec![uniform_knots(cfg); c],
    };
    let weights = match log_w {
        Some(lw) => (0..c)
            .map(|ch| lw.data()[ch * n..(ch + 1) * n].iter().map(|v| v.exp()).collect())
            .collect(),
        None => vec![vec![1.0; n]; c],
    };
    Ok(ChannelSplines { knots, weights })
}

/// Applies channel `c`'s rational spline to every element of channel `c`
/// of `x` (`[C, ...]`). Inputs are clamped to `[-r, r]` first; the clamped
/// region passes no gradient to `x`.
///
/// `ctrl` and `log_w` are `[C, n_basis]`, `knot_raw` is `[C, interior + 1]`.
/// Passing `None` for `knot_raw`/`log_w` fixes uniform knots/unit weights.
pub fn nuk_apply<'t>(
    x: Var<'t>,
    ctrl: Var<'t>,
    knot_raw: Option<Var<'t>>,
    log_w: Option<Var<'t>>,
    cfg: &NcpgConfig,
) -> Result<Var<'t>> {
    cfg.validate()?;
    let xv = x.value();
    let shape = xv.shape().to_vec();
    let c = *shape
        .first()
        .ok_or_else(|| NukesError::ShapeMismatch("scalar input".into()))?;
    let per = xv.numel() / c.max(1);
    let (p, n, k) = (cfg.degree, cfg.n_basis(), cfg.n_increments());
    let cv = ctrl.value();
    if cv.shape() != [c, n] {
        return Err(NukesError::ShapeMismatch(format!("ctrl {:?}, want [{c}, {n}]", cv.shape())));
    }
    let rawv = knot_raw.map(|v| v.value());
    if let Some(r) = &rawv {
        if r.shape() != [c, k] {
            return Err(NukesError::ShapeMismatch(format!("knot_raw {:?}, want [{c}, {k}]", r.shape())));
        }
    }
    let lwv = log_w.map(|v| v.value());
    if let Some(l) = &lwv {
        if l.shape() != [c, n] {
            return Err(NukesError::ShapeMismatch(format!("log_w {:?}, want [{c}, {n}]", l.shape())));
        }
    }
    let geo = resolve(c, cfg, rawv.as_deref(), lwv.as_deref())?;
    let r = cfg.radius;

    let mut y = vec![0.0; xv.numel()];
    let mut row = vec![0.0; p + 1];
    for ch in 0..c {
        let knots = &geo.knots[ch];
        let w = &geo.weights[ch];
        let pts = &cv.data()[ch * n..(ch + 1) * n];
        let mut mats: Vec<Option<Vec<f64>>> = vec![None; knots.len()];
        for idx in ch * per..(ch + 1) * per {
            let xc = xv.data()[idx].clamp(-r, r);
            let s = find_span(p, xc, knots)?;
            if mats[s].is_none() {
                mats[s] = Some(span_matrix(p, knots, s)?);
            }
            let u = (xc - knots[s]) / (knots[s + 1] - knots[s]);
            eval_span_row_into(p, mats[s].as_ref().expect("filled"), u, &mut row);
            let (mut num, mut den) = (0.0, 0.0);
            for (j, nb) in row.iter().enumerate() {
                let i = s - p + j;
                num += nb * w[i] * pts[i];
                den += nb * w[i];
            }
            if !(den > 0.0) {
                return Err(NukesError::ZeroDenominator { x: xc });
            }
            y[idx] = num / den;
        }
    }

    let mut parents = vec![x, ctrl];
    parents.extend(knot_raw);
    parents.extend(log_w);
    let has_raw = knot_raw.is_some();
    let has_lw = log_w.is_some();
    let cfg = cfg.clone();
    let yv = Rc::new(tensor(&shape, y));
    let y_saved = Rc::clone(&yv);
    let var = x.tape().record(
        "nuk_apply",
        &parents,
        yv,
        Box::new(move |g, need| {
            let mut gx = vec![0.0; xv.numel()];
            let mut gc = vec![0.0; c * n];
            let mut graw = vec![0.0; c * k];
            let mut glw = vec![0.0; c * n];
            let want_knots = has_raw && need[2];
            let np = p + 1;
            let mut pows = vec![0.0; np];
            let mut vals = vec![0.0; np];
            let mut dvals = vec![0.0; np];
            for ch in 0..c {
                let knots = &geo.knots[ch];
                let w = &geo.weights[ch];
                let pts = &cv.data()[ch * n..(ch + 1) * n];
                let mut mats: Vec<Option<Vec<f64>>> = vec![None; knots.len()];
                // per span: sum of go * dy/dN_j * u^(p-r), and of go * dy/du * du/dt
                // for t_s and t_{s+1}
                let mut acc: Vec<Option<(Vec<f64>, f64, f64)>> = vec![None; knots.len()];
                for idx in ch * per..(ch + 1) * per {
                    let go = g.data()[idx];
                    if go == 0.0 {
                        continue;
                    }
                    let x0 = xv.data()[idx];
                    let xc = x0.clamp(-r, r);
                    let s = find_span(p, xc, knots).expect("validated in forward");
                    let m = mats[s].get_or_insert_with(|| span_matrix(p, knots, s).expect("validated in forward"));
                    let h = knots[s + 1] - knots[s];
                    let u = (xc - knots[s]) / h;
                    // pows[r] = u^(p-r)
                    pows[p] = 1.0;
                    for r in (0..p).rev() {
                        pows[r] = pows[r + 1] * u;
                    }
                    for j in 0..np {
                        let (mut v, mut dv) = (0.0, 0.0);
                        for r in 0..np {
                            let e = r * np + j;
                            v += m[e] * pows[r];
                            if r < p {
                                dv += m[e] * (p - r) as f64 * pows[r + 1];
                            }
                        }
                        vals[j] = v;
                        dvals[j] = dv;
                    }
                    let yy = y_saved.data()[idx];
                    let den: f64 = (0..np).map(|j| vals[j] * w[s - p + j]).sum();
                    let mut dydu = 0.0;
                    let mut slot = want_knots.then(|| acc[s].get_or_insert_with(|| (vec![0.0; np * np], 0.0, 0.0)));
                    for j in 0..np {
                        let i = s - p + j;
                        // dy/dN_j = w_i (P_i - y) / den
                        let dy_dn = w[i] * (pts[i] - yy) / den;
                        gc[ch * n + i] += go * vals[j] * w[i] / den;
                        glw[ch * n + i] += go * vals[j] * dy_dn;
                        dydu += dy_dn * dvals[j];
                        if let Some(sl) = slot.as_mut() {
                            for r in 0..np {
                                sl.0[r * np + j] += go * dy_dn * pows[r];
                            }
                        }
                    }
                    if (-r..=r).contains(&x0) {
                        gx[idx] = go * dydu / h;
                    }
                    if let Some(sl) = slot.as_mut() {
                        sl.1 += go * dydu * (u - 1.0) / h;
                        sl.2 -= go * dydu * u / h;
                    }
                }
                let mut gt = vec![0.0; knots.len()];
                if want_knots {
                    for (s, a) in acc.iter().enumerate() {
                        let Some((gm, a0, a1)) = a else { continue };
                        gt[s] += a0;
                        gt[s + 1] += a1;
                        if p == 0 {
                            continue;
                        }
                        let jac = span_matrix_jacobian(p, knots, s);
                        let first = s + 1 - p;
                        for (e, ge) in gm.iter().enumerate() {
                            for q in 0..2 * p {
                                gt[first + q] += ge * jac.d_knots[e][q];
                            }
                        }
                    }
                }
                if want_knots {
                    let raw = &rawv.as_ref().expect("has_raw").data()[ch * k..(ch + 1) * k];
                    let jac = knot_jacobian(raw, &cfg);
                    for (j, jrow) in jac.iter().enumerate() {
                        let gk = gt[p + 1 + j];
                        for (i, dj) in jrow.iter().enumerate() {
                            graw[ch * k + i] += gk * dj;
                        }
                    }
                }
            }
            let mut out = vec![Some(tensor(&shape, gx)), Some(tensor(&[c, n], gc))];
            if has_raw {
                out.push(Some(tensor(&[c, k], graw)));
            }
            if has_lw {
                out.push(Some(tensor(&[c, n], glw)));
            }
            out
        }),
    )?;
    Ok(var)
}

/// 1-D convolution along the channel axis with two filters of width 3 and
/// zero padding: `[C, ...] -> [2C, ...]`, filter `f` in rows `f*C..(f+1)*C`.
pub fn spec_conv<'t>(x: Var<'t>, w: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    let (xv, wv, bv) = (x.value(), w.value(), b.value());
    if wv.shape() != [2, 3] || bv.shape() != [2] {
        return Err(NukesError::ShapeMismatch(format!(
            "spec_conv weights {:?}, bias {:?}",
            wv.shape(),
            bv.shape()
        )));
    }
    let shape = xv.shape().to_vec();
    let c = *shape
        .first()
        .ok_or_else(|| NukesError::ShapeMismatch("scalar input".into()))?;
    let per = xv.numel() / c.max(1);
    let xd = xv.data();
    let mut y = vec![0.0; 2 * c * per];
    for f in 0..2 {
        for ch in 0..c {
            let dst = &mut y[(f * c + ch) * per..(f * c + ch + 1) * per];
            dst.iter_mut().for_each(|v| *v = bv.data()[f]);
            for kk in 0..3 {
                let src = ch as isize + kk as isize - 1;
                if src < 0 || src >= c as isize {
                    continue;
                }
                let wk = wv.data()[f * 3 + kk];
                let s = &xd[src as usize * per..(src as usize + 1) * per];
                for (o, &v) in dst.iter_mut().zip(s) {
                    *o += wk * v;
                }
            }
        }
    }
    let mut out_shape = shape.clone();
    out_shape[0] = 2 * c;
    let var = x.tape().record(
        "spec_conv",
        &[x, w, b],
        Rc::new(tensor(&out_shape, y)),
        Box::new(move |g, _| {
            let gd = g.data();
            let xd = xv.data();
            let mut gx = vec![0.0; c * per];
            let mut gw = vec![0.0; 6];
            let mut gb = vec![0.0; 2];
            for f in 0..2 {
                for ch in 0..c {
                    let go = &gd[(f * c + ch) * per..(f * c + ch + 1) * per];
                    gb[f] += go.iter().sum::<f64>();
                    for kk in 0..3 {
                        let src = ch as isize + kk as isize - 1;
                        if src < 0 || src >= c as isize {
                            continue;
                        }
                        let src = src as usize;
                        let wk = wv.data()[f * 3 + kk];
                        let xs = &xd[src * per..(src + 1) * per];
                        let mut acc = 0.0;
                        for ((gxv, &gv), &xval) in gx[src * per..(src + 1) * per].iter_mut().zip(go).zip(xs) {
                            *gxv += gv * wk;
                            acc += gv * xval;
                        }
                        gw[f * 3 + kk] += acc;
                    }
                }
            }
            vec![
                Some(tensor(&shape, gx)),
                Some(tensor(&[2, 3], gw)),
                Some(tensor(&[2], gb)),
            ]
        }),
    )?;
    Ok(var)
}

/// `alpha * mix(Nuk(x)) + up * sigmoid(dw)` where `(up, dw)` is the split
/// output of [`spec_conv`].
#[derive(Clone, Debug)]
pub struct NukesLayer {
    pub prefix: String,
    pub channels: usize,
    pub config: NukesConfig,
}

impl NukesLayer {
    pub fn new(prefix: impl Into<String>, channels: usize, config: NukesConfig) -> Self {
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
        let sc = &self.config.spline;
        let n = sc.n_basis();
        let ctrl0 = greville(sc.degree, &uniform_knots(sc));
        let mut specs = vec![
            ParamSpec::new(self.name("spec_w"), [2, 3], Init::Uniform(1.0 / 3f64.sqrt())),
            ParamSpec::new(self.name("spec_b"), [2], Init::Zeros),
            ParamSpec::new(
                self.name("ctrl"),
                [c, n],
                Init::Values(ctrl0.iter().cycle().take(c * n).copied().collect()),
            ),
            ParamSpec::new(self.name("mix"), [c, c], Init::Uniform(1.0 / (c as f64).sqrt())),
            ParamSpec::new(self.name("alpha"), [1], Init::Const(1.0)),
        ];
        if self.config.adaptive {
            specs.push(ParamSpec::new(self.name("knot_raw"), [c, sc.n_increments()], Init::Zeros));
            specs.push(ParamSpec::new(self.name("log_w"), [c, n], Init::Zeros));
        }
        specs
    }

    pub fn forward<'t>(&self, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
        let shape = x.shape();
        if shape.first() != Some(&self.channels) {
            return Err(NukesError::ShapeMismatch(format!(
                "layer has {} channels, input {:?}",
                self.channels, shape
            )));
        }
        let c = self.channels;
        let halves = spec_conv(x, b.get(&self.name("spec_w"))?, b.get(&self.name("spec_b"))?)?;
        let up = halves.slice(0, c)?;
        let dw = halves.slice(c, 2 * c)?;
        let (knot_raw, log_w) = if self.config.adaptive {
            (Some(b.get(&self.name("knot_raw"))?), Some(b.get(&self.name("log_w"))?))
        } else {
            (None, None)
        };
        let z = nuk_apply(x, b.get(&self.name("ctrl"))?, knot_raw, log_w, &self.config.spline)?;
        let mixed = z.conv1x1(b.get(&self.name("mix"))?, None)?;
        let gate = up.mul(dw.sigmoid()?)?;
        Ok(mixed.mul_scalar(b.get(&self.name("alpha"))?)?.add(gate)?)
    }

    /// The per-channel curves currently encoded in `params`.
    pub fn spline_specs(&self, params: &ParamSet) -> Result<Vec<SplineSpec>> {
        let get = |s: &str| {
            params
                .get(&self.name(s))
                .ok_or_else(|| NukesError::ShapeMismatch(format!("missing parameter {}", self.name(s))))
        };
        let ctrl = get("ctrl")?;
        let (raw, lw) = if self.config.adaptive {
            (Some(get("knot_raw")?), Some(get("log_w")?))
        } else {
            (None, None)
        };
        let geo = resolve(self.channels, &self.config.spline, raw, lw)?;
        let n = self.config.spline.n_basis();
        (0..self.channels)
            .map(|ch| {
                let s = SplineSpec {
                    degree: self.config.spline.degree,
                    knots: geo.knots[ch].clone(),
                    control_points: ctrl.data()[ch * n..(ch + 1) * n].to_vec(),
                    weights: geo.weights[ch].clone(),
                };
                s.validate()?;
                Ok(s)
            })
            .collect()
    }
}

/// Functional form of [`NukesLayer::forward`].
pub fn nukes_ffn_forward<'t>(layer: &NukesLayer, b: &Binder<'t, '_>, x: Var<'t>) -> Result<Var<'t>> {
    layer.forward(b, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcore::{grad_check_many, CheckOptions, Tape};
    use crate::nukes::spline::nuk_eval;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
        Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-scale..scale))
    }

    fn small_cfg() -> NcpgConfig {
        NcpgConfig {
            degree: 3,
            interior_knots: 4,
            radius: 2.0,
        }
    }

    #[test]
    fn nuk_apply_matches_scalar_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = small_cfg();
        let (c, n, k) = (2, cfg.n_basis(), cfg.n_increments());
        let tape = Tape::new();
        let x = rand_tensor(&mut rng, &[c, 3, 3], 2.5);
        let ctrl = rand_tensor(&mut rng, &[c, n], 1.0);
        let raw = rand_tensor(&mut rng, &[c, k], 1.0);
        let lw = rand_tensor(&mut rng, &[c, n], 0.5);
        let y = nuk_apply(
            tape.constant(x.clone()),
            tape.constant(ctrl.clone()),
            Some(tape.constant(raw.clone())),
            Some(tape.constant(lw.clone())),
            &cfg,
        )
        .unwrap();
        for ch in 0..c {
            let knots = ncpg_knots(&raw.data()[ch * k..(ch + 1) * k], &cfg).unwrap();
            let spec = SplineSpec {
                degree: 3,
                knots,
                control_points: ctrl.data()[ch * n..(ch + 1) * n].to_vec(),
                weights: lw.data()[ch * n..(ch + 1) * n].iter().map(|v| v.exp()).collect(),
            };
            for i in 0..9 {
                let xv = x.data()[ch * 9 + i].clamp(-2.0, 2.0);
                let want = nuk_eval(&spec, xv).unwrap();
                assert!((y.value().data()[ch * 9 + i] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nuk_apply_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = small_cfg();
        let (c, n, k) = (2, cfg.n_basis(), cfg.n_increments());
        // stay away from the clamp kinks at +-r
        let x = rand_tensor(&mut rng, &[c, 2, 3], 1.8);
        let inputs = [
            x,
            rand_tensor(&mut rng, &[c, n], 1.0),
            rand_tensor(&mut rng, &[c, k], 1.0),
            rand_tensor(&mut rng, &[c, n], 0.5),
            rand_tensor(&mut rng, &[c, 2, 3], 1.0),
        ];
        let rep = grad_check_many(
            |_, v| -> std::result::Result<Var, NukesError> {
                let y = nuk_apply(v[0], v[1], Some(v[2]), Some(v[3]), &cfg)?;
                Ok(y.mul(v[4])?.sum()?)
            },
            &inputs,
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(rep.passed(), "{:?}", rep.worst());
    }

    #[test]
    fn clamped_input_is_finite_with_zero_grad() {
        let cfg = small_cfg();
        let tape = Tape::new();
        let x = tape.leaf(Tensor::new([1, 2], vec![-50.0, 50.0]).unwrap());
        let ctrl = tape.constant(Tensor::new([1, cfg.n_basis()], greville(3, &uniform_knots(&cfg))).unwrap());
        let y = nuk_apply(x, ctrl, None, None, &cfg).unwrap();
        assert_eq!(y.value().data(), &[-2.0, 2.0]);
        let g = tape.backward(y.sum().unwrap()).unwrap();
        assert_eq!(g.wrt(x).data(), &[0.0, 0.0]);
    }

    #[test]
    fn spec_conv_gradients_and_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = rand_tensor(&mut rng, &[4, 2, 2], 1.0);
        let w = Tensor::new([2, 3], vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let tape = Tape::new();
        let y = spec_conv(tape.constant(x.clone()), tape.constant(w), tape.constant(Tensor::new([2], vec![0.0, 0.5]).unwrap())).unwrap();
        let yv = y.value();
        // filter 0 is identity; filter 1 shifts channels down by one
        assert_eq!(&yv.data()[..16], x.data());
        assert!(yv.data()[16..20].iter().all(|&v| v == 0.5));
        assert_eq!(yv.data()[20], x.data()[0] + 0.5);

        let inputs = [x, rand_tensor(&mut rng, &[2, 3], 1.0), rand_tensor(&mut rng, &[2], 1.0), rand_tensor(&mut rng, &[8, 2, 2], 1.0)];
        let rep = grad_check_many(
            |_, v| -> std::result::Result<Var, NukesError> { Ok(spec_conv(v[0], v[1], v[2])?.mul(v[3])?.sum()?) },
            &inputs,
            &CheckOptions::default(),
        )
        .unwrap();
        assert!(rep.passed(), "{:?}", rep.worst());
    }

    fn layer_params(layer: &NukesLayer, seed: u64) -> ParamSet {
        let mut ps = ParamSet::from_specs(&layer.param_specs(), seed).unwrap();
        // move away from the symmetric init so every parameter matters
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for (_, t) in ps.iter_mut() {
            for v in t.data_mut() {
                *v += rng.random_range(-0.2..0.2);
            }
        }
        ps
    }

    #[test]
    fn zero_alpha_leaves_gate_only() {
        let layer = NukesLayer::new("ffn", 3, NukesConfig::default());
        let mut ps = layer_params(&layer, 1);
        ps.get_mut("ffn.alpha").unwrap().data_mut()[0] = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = rand_tensor(&mut rng, &[3, 2, 2], 1.0);
        let tape = Tape::new();
        let b = Binder::new(&tape, &ps);
        let y = layer.forward(&b, tape.constant(x.clone())).unwrap();
        let halves = spec_conv(
            tape.constant(x),
            tape.constant(ps.get("ffn.spec_w").unwrap().clone()),
            tape.constant(ps.get("ffn.spec_b").unwrap().clone()),
        )
        .unwrap();
        let h = halves.value();
        for i in 0..12 {
            let want = h.data()[i] * crate::gradcore::ops::sigmoid(h.data()[12 + i]);
            assert_eq!(y.value().data()[i], want);
        }
    }

    #[test]
    fn layer_gradients_all_params() {
        for adaptive in [true, false] {
            let cfg = NukesConfig { adaptive, ..NukesConfig::default() };
            let layer = NukesLayer::new("ffn", 3, cfg);
            let ps = layer_params(&layer, 2);
            let names: Vec<String> = ps.names().cloned().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut inputs: Vec<Tensor> = vec![rand_tensor(&mut rng, &[3, 2, 2], 2.0)];
            inputs.extend(names.iter().map(|n| ps.get(n).unwrap().clone()));
            let rep = grad_check_many(
                |tape, v| -> std::result::Result<Var, NukesError> {
                    let b = Binder::new(tape, &ps);
                    for (n, var) in names.iter().zip(&v[1..]) {
                        b.bind(n.clone(), *var);
                    }
                    Ok(layer.forward(&b, v[0])?.square()?.sum()?)
                },
                &inputs,
                &CheckOptions::default(),
            )
            .unwrap();
            assert!(rep.passed(), "adaptive={adaptive} {:?}", rep.worst());
            // no dead parameters
            for (i, name) in names.iter().enumerate() {
                let any = rep.coords.iter().any(|c| c.input == i + 1 && c.analytic != 0.0);
                assert!(any, "{name} has zero gradient");
            }
        }
    }

    #[test]
    fn channel_mismatch() {
        let layer = NukesLayer::new("ffn", 3, NukesConfig::default());
        let ps = ParamSet::from_specs(&layer.param_specs(), 0).unwrap();
        let tape = Tape::new();
        let b = Binder::new(&tape, &ps);
        let x = tape.constant(Tensor::zeros([4, 2, 2]));
        assert!(matches!(layer.forward(&b, x), Err(NukesError::ShapeMismatch(_))));
    }

    #[test]
    fn spline_specs_identity_at_init() {
        let layer = NukesLayer::new("ffn", 2, NukesConfig::default());
        let ps = ParamSet::from_specs(&layer.param_specs(), 0).unwrap();
        for s in layer.spline_specs(&ps).unwrap() {
            assert!((nuk_eval(&s, 1.3).unwrap() - 1.3).abs() < 1e-12);
        }
    }
}
