//! Registry of gradient checks.
//!
//! Every case reduces its op, layer, network or loss to a scalar and
//! compares reverse-mode gradients with central differences. Tensor outputs
//! are reduced with a fixed random probe `sum(w * y)` so that every output
//! coordinate contributes with a distinct weight.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nukes_core::gmsa::{
    gabor_branch, gabor_kernels, spectral_msa, AttnScale, GaborConfig, Gmsa, GmsaConfig, MsaParams, NukMsaBlock,
};
use nukes_core::gradcore::{
    grad_check_many, Binder, CheckOptions, GradError, GradReport, ParamSet, ParamSpec, Tensor, Var,
};
use nukes_core::losses::{
    adversarial_loss, cycle_loss, dcpm_losses, dcpm_sample, non_degraded_loss, total_loss, DcpmConfig, LossTerms,
    LossWeights,
};
use nukes_core::nukes::{nuk_apply, spec_conv, NcpgConfig, NukesConfig, NukesLayer};
use nukes_core::nukesformer::{
    cycle_pass, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, ModelConfig, NukesFormer, Projector,
    Role,
};

use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseKind {
    Primitive,
    Layer,
    Network,
    Loss,
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseKind::Primitive => "primitive",
            CaseKind::Layer => "layer",
            CaseKind::Network => "network",
            CaseKind::Loss => "loss",
        })
    }
}

pub type CaseFn = fn(&CheckOptions) -> Result<GradReport>;

#[derive(Clone, Copy)]
pub struct GradCase {
    pub name: &'static str,
    pub kind: CaseKind,
    pub run: CaseFn,
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    pub name: String,
    pub kind: CaseKind,
    pub coords: usize,
    pub max_rel_error: f64,
    pub passed: bool,
    /// Set when the case could not be evaluated at all.
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub results: Vec<CaseResult>,
    pub tol: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&CaseResult> {
        self.results.iter().filter(|r| !r.passed).collect()
    }

    pub fn worst(&self) -> f64 {
        self.results.iter().map(|r| r.max_rel_error).fold(0.0, f64::max)
    }

    /// One line per case.
    pub fn lines(&self) -> Vec<String> {
        self.results
            .iter()
            .map(|r| {
                let status = if r.passed { "PASS" } else { "FAIL" };
                match &r.error {
                    Some(e) => format!("{status} {:<9} {:<28} error: {e}", r.kind.to_string(), r.name),
                    None => format!(
                        "{status} {:<9} {:<28} coords {:>4}  max rel err {:.3e}",
                        r.kind.to_string(),
                        r.name,
                        r.coords,
                        r.max_rel_error
                    ),
                }
            })
            .collect()
    }
}

/// Options used by `nukesctl gradcheck` and the acceptance run. Step and
/// tolerance are the defaults; the floor means a coordinate whose gradient is
/// below 1e-4 must agree to 1e-8 absolute, which is about where
/// central-difference rounding noise sits for the full networks.
pub fn suite_options() -> CheckOptions {
    CheckOptions {
        floor: 1e-4,
        max_coords: Some(4),
        ..CheckOptions::default()
    }
}

pub fn run_cases(cases: &[GradCase], opts: &CheckOptions) -> SuiteReport {
    let results = cases
        .iter()
        .map(|c| match (c.run)(opts) {
            Ok(rep) => CaseResult {
                name: c.name.to_string(),
                kind: c.kind,
                coords: rep.coords.len(),
                max_rel_error: rep.max_rel_error,
                passed: rep.passed() && !rep.coords.is_empty(),
                error: None,
            },
            Err(e) => CaseResult {
                name: c.name.to_string(),
                kind: c.kind,
                coords: 0,
                max_rel_error: f64::INFINITY,
                passed: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    SuiteReport { results, tol: opts.tol }
}

pub fn run_suite(opts: &CheckOptions) -> SuiteReport {
    run_cases(&registry(), opts)
}

/// Cases whose name starts with `filter` (all when empty).
pub fn select(filter: &str) -> Vec<GradCase> {
    registry().into_iter().filter(|c| c.name.starts_with(filter)).collect()
}

// ---------------------------------------------------------------- helpers

pub fn random_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(lo..hi))
}

/// `sum(w * y)` with a fixed random `w`.
pub fn probe<'t>(y: Var<'t>, seed: u64) -> std::result::Result<Var<'t>, GradError> {
    let w = y.tape().constant(random_tensor(&y.shape(), seed ^ 0x9e37, -1.0, 1.0));
    y.mul(w)?.sum()
}

fn unary<F>(opts: &CheckOptions, shape: &[usize], lo: f64, hi: f64, f: F) -> Result<GradReport>
where
    F: for<'t> Fn(Var<'t>) -> std::result::Result<Var<'t>, GradError>,
{
    let x = random_tensor(shape, 11, lo, hi);
    grad_check_many(|_, v| Ok(probe(f(v[0])?, 1)?), &[x], opts)
}

fn binary<F>(opts: &CheckOptions, a: Tensor, b: Tensor, f: F) -> Result<GradReport>
where
    F: for<'t> Fn(Var<'t>, Var<'t>) -> std::result::Result<Var<'t>, GradError>,
{
    grad_check_many(|_, v| Ok(probe(f(v[0], v[1])?, 2)?), &[a, b], opts)
}

/// Parameters drawn from their specs and then jittered, so zero-initialized
/// biases and flat knot increments are checked away from their start point.
fn jittered(specs: &[ParamSpec], seed: u64) -> Result<ParamSet> {
    let mut ps = ParamSet::from_specs(specs, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for (_, t) in ps.iter_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
    }
    Ok(ps)
}

/// Checks `f` with respect to `inputs` and every parameter in `ps`.
fn with_params<F>(opts: &CheckOptions, ps: &ParamSet, inputs: Vec<Tensor>, f: F) -> Result<GradReport>
where
    F: for<'t, 'p> Fn(&Binder<'t, 'p>, &[Var<'t>]) -> Result<Var<'t>>,
{
    let names: Vec<String> = ps.names().cloned().collect();
    let k = inputs.len();
    let mut all = inputs;
    all.extend(names.iter().map(|n| ps.get(n).expect("listed").clone()));
    grad_check_many(
        |tape, vars| {
            let b = Binder::new(tape, ps);
            for (n, v) in names.iter().zip(&vars[k..]) {
                b.bind(n.clone(), *v);
            }
            f(&b, &vars[..k])
        },
        &all,
        opts,
    )
}

fn small_spline() -> NcpgConfig {
    NcpgConfig {
        degree: 3,
        interior_knots: 5,
        radius: 3.0,
    }
}

fn small_nukes() -> NukesConfig {
    NukesConfig {
        spline: small_spline(),
        adaptive: true,
    }
}

fn small_gmsa() -> GmsaConfig {
    GmsaConfig {
        gabor: GaborConfig {
            kernels: 2,
            size: 3,
            ..GaborConfig::default()
        },
        ..GmsaConfig::default()
    }
}

fn small_model() -> Result<NukesFormer> {
    Ok(NukesFormer::new(ModelConfig {
        bands: 5,
        generator: GeneratorConfig {
            stage_blocks: vec![1, 1, 1],
            base_channels: 4,
            gmsa: small_gmsa(),
            nukes: small_nukes(),
        },
        discriminator: DiscriminatorConfig::default(),
        projector_dim: 6,
    })?)
}

/// HSI `x` and RGB `y` for the small model at 8x8.
fn loss_inputs() -> Vec<Tensor> {
    vec![
        random_tensor(&[5, 8, 8], 21, 0.05, 0.95),
        random_tensor(&[3, 8, 8], 22, 0.05, 0.95),
    ]
}

fn model_case<F>(opts: &CheckOptions, f: F) -> Result<GradReport>
where
    F: for<'t, 'p> Fn(&NukesFormer, &Binder<'t, 'p>, Var<'t>, Var<'t>) -> Result<Var<'t>>,
{
    let model = small_model()?;
    let ps = jittered(&model.param_specs(Role::Train), 5)?;
    with_params(opts, &ps, loss_inputs(), |b, v| f(&model, b, v[0], v[1]))
}

// ---------------------------------------------------------------- cases

macro_rules! case {
    ($name:expr, $kind:ident, $body:expr) => {
        GradCase {
            name: $name,
            kind: CaseKind::$kind,
            run: $body,
        }
    };
}

pub fn registry() -> Vec<GradCase> {
    let mut v = primitive_cases();
    v.extend(layer_cases());
    v.extend(network_cases());
    v.extend(loss_cases());
    v
}

fn primitive_cases() -> Vec<GradCase> {
    vec![
        case!("add", Primitive, |o| binary(o, random_tensor(&[3, 4], 1, -1.0, 1.0), random_tensor(&[3, 4], 2, -1.0, 1.0), |a, b| a.add(b))),
        case!("sub", Primitive, |o| binary(o, random_tensor(&[3, 4], 1, -1.0, 1.0), random_tensor(&[3, 4], 2, -1.0, 1.0), |a, b| a.sub(b))),
        case!("mul", Primitive, |o| binary(o, random_tensor(&[3, 4], 1, -1.0, 1.0), random_tensor(&[3, 4], 2, -1.0, 1.0), |a, b| a.mul(b))),
        case!("mul_scalar", Primitive, |o| binary(o, random_tensor(&[3, 4], 1, -1.0, 1.0), random_tensor(&[1], 2, 0.5, 1.5), |a, s| a.mul_scalar(s))),
        case!("scale", Primitive, |o| unary(o, &[3, 4], -1.0, 1.0, |x| x.scale(-1.7))),
        case!("add_const", Primitive, |o| unary(o, &[3, 4], -1.0, 1.0, |x| x.add_const(0.3)?.square())),
        case!("neg", Primitive, |o| unary(o, &[3, 4], -1.0, 1.0, |x| x.neg())),
        case!("exp", Primitive, |o| unary(o, &[3, 4], -1.0, 1.0, |x| x.exp())),
        case!("log", Primitive, |o| unary(o, &[3, 4], 0.2, 2.0, |x| x.log())),
        case!("sigmoid", Primitive, |o| unary(o, &[3, 4], -3.0, 3.0, |x| x.sigmoid())),
        case!("gelu", Primitive, |o| unary(o, &[3, 4], -3.0, 3.0, |x| x.gelu())),
        case!("softplus", Primitive, |o| unary(o, &[3, 4], -3.0, 3.0, |x| x.softplus())),
        // inputs kept off the kink at 0
        case!("leaky_relu", Primitive, |o| unary(o, &[3, 4], 0.1, 1.0, |x| {
            let t = x.tape().constant(Tensor::from_fn([3, 4], |i| if i % 2 == 0 { 1.0 } else { -1.0 }));
            x.mul(t)?.leaky_relu(0.2)
        })),
        case!("acos", Primitive, |o| unary(o, &[3, 4], -0.9, 0.9, |x| x.acos())),
        case!("sqrt", Primitive, |o| unary(o, &[3, 4], 0.2, 2.0, |x| x.sqrt())),
        case!("square", Primitive, |o| unary(o, &[3, 4], -1.0, 1.0, |x| x.square())),
        case!("pow", Primitive, |o| unary(o, &[3, 4], 0.2, 2.0, |x| x.pow(1.7))),
        case!("clamp", Primitive, |o| unary(o, &[3, 4], -0.45, 0.45, |x| {
            // half the entries sit outside the clamp range
            let t = x.tape().constant(Tensor::from_fn([3, 4], |i| if i % 2 == 0 { 1.0 } else { 4.0 }));
            x.mul(t)?.clamp(-0.5, 0.5)
        })),
        case!("sum", Primitive, |o| unary(o, &[3, 4], -1.0, 1.0, |x| x.square()?.sum())),
        case!("mean", Primitive, |o| unary(o, &[3, 4], -1.0, 1.0, |x| x.square()?.mean())),
        case!("reshape", Primitive, |o| unary(o, &[3, 4], -1.0, 1.0, |x| x.reshape(&[2, 6])?.square())),
        case!("transpose", Primitive, |o| unary(o, &[3, 4], -1.0, 1.0, |x| x.transpose()?.square())),
        case!("matmul", Primitive, |o| binary(o, random_tensor(&[3, 4], 1, -1.0, 1.0), random_tensor(&[4, 5], 2, -1.0, 1.0), |a, b| a.matmul(b))),
        case!("softmax_axis0", Primitive, |o| unary(o, &[3, 4], -2.0, 2.0, |x| x.softmax(0))),
        case!("softmax_axis1", Primitive, |o| unary(o, &[3, 4], -2.0, 2.0, |x| x.softmax(1))),
        case!("concat", Primitive, |o| binary(o, random_tensor(&[2, 3, 3], 1, -1.0, 1.0), random_tensor(&[3, 3, 3], 2, -1.0, 1.0), |a, b| Var::concat(&[a, b])?.square())),
        case!("slice", Primitive, |o| unary(o, &[5, 3], -1.0, 1.0, |x| x.slice(1, 4)?.square())),
        case!("select_cols", Primitive, |o| unary(o, &[3, 6], -1.0, 1.0, |x| x.select_cols(&[4, 0, 4, 2])?.square())),
        case!("layer_norm", Primitive, |o| {
            let ins = [random_tensor(&[4, 3, 3], 1, -1.0, 1.0), random_tensor(&[4], 2, 0.5, 1.5), random_tensor(&[4], 3, -0.5, 0.5)];
            grad_check_many(|_, v| Ok(probe(v[0].layer_norm(v[1], v[2], 1e-5)?, 4)?), &ins, o)
        }),
        case!("global_avg_pool", Primitive, |o| unary(o, &[3, 4, 4], -1.0, 1.0, |x| x.global_avg_pool()?.square())),
        case!("conv1x1", Primitive, |o| {
            let ins = [random_tensor(&[3, 4, 4], 1, -1.0, 1.0), random_tensor(&[5, 3], 2, -1.0, 1.0), random_tensor(&[5], 3, -1.0, 1.0)];
            grad_check_many(|_, v| Ok(probe(v[0].conv1x1(v[1], Some(v[2]))?, 4)?), &ins, o)
        }),
        case!("conv2d_stride1", Primitive, |o| {
            let ins = [random_tensor(&[2, 5, 5], 1, -1.0, 1.0), random_tensor(&[3, 2, 3, 3], 2, -1.0, 1.0), random_tensor(&[3], 3, -1.0, 1.0)];
            grad_check_many(|_, v| Ok(probe(v[0].conv2d(v[1], Some(v[2]), 1, 1)?, 4)?), &ins, o)
        }),
        case!("conv2d_stride2", Primitive, |o| {
            let ins = [random_tensor(&[2, 6, 6], 1, -1.0, 1.0), random_tensor(&[3, 2, 3, 3], 2, -1.0, 1.0), random_tensor(&[3], 3, -1.0, 1.0)];
            grad_check_many(|_, v| Ok(probe(v[0].conv2d(v[1], Some(v[2]), 2, 1)?, 4)?), &ins, o)
        }),
        case!("conv2d_depthwise", Primitive, |o| binary(o, random_tensor(&[2, 5, 5], 1, -1.0, 1.0), random_tensor(&[3, 3, 3], 2, -1.0, 1.0), |x, k| x.conv2d_depthwise(k))),
        case!("avg_pool2", Primitive, |o| unary(o, &[2, 4, 6], -1.0, 1.0, |x| x.avg_pool2()?.square())),
        case!("upsample2", Primitive, |o| unary(o, &[2, 3, 2], -1.0, 1.0, |x| x.upsample2()?.square())),
        case!("nuk_apply", Primitive, |o| {
            let cfg = small_spline();
            let n = cfg.n_basis();
            let k = cfg.n_increments();
            let ins = [
                random_tensor(&[2, 3, 4], 1, -2.8, 2.8),
                random_tensor(&[2, n], 2, -1.0, 1.0),
                random_tensor(&[2, k], 3, -0.5, 0.5),
                random_tensor(&[2, n], 4, -0.3, 0.3),
            ];
            grad_check_many(|_, v| Ok(probe(nuk_apply(v[0], v[1], Some(v[2]), Some(v[3]), &small_spline())?, 5)?), &ins, o)
        }),
        case!("spec_conv", Primitive, |o| {
            let ins = [random_tensor(&[4, 3, 3], 1, -1.0, 1.0), random_tensor(&[2, 3], 2, -1.0, 1.0), random_tensor(&[2], 3, -1.0, 1.0)];
            grad_check_many(|_, v| Ok(probe(spec_conv(v[0], v[1], v[2])?, 4)?), &ins, o)
        }),
        case!("gabor_kernels", Primitive, |o| {
            let cfg = GaborConfig { kernels: 3, size: 5, ..GaborConfig::default() };
            let ins = [random_tensor(&[3], 1, 0.6, 1.6), random_tensor(&[3], 2, 0.0, 3.0)];
            grad_check_many(|_, v| Ok(probe(gabor_kernels(v[0], v[1], &cfg)?, 4)?), &ins, o)
        }),
        case!("gabor_kernels_alt", Primitive, |o| {
            let cfg = GaborConfig { kernels: 3, size: 5, alt_form: true, ..GaborConfig::default() };
            let ins = [random_tensor(&[3], 1, 0.6, 1.6), random_tensor(&[3], 2, 0.0, 3.0)];
            grad_check_many(|_, v| Ok(probe(gabor_kernels(v[0], v[1], &cfg)?, 4)?), &ins, o)
        }),
        case!("gabor_branch", Primitive, |o| {
            let ins = [
                random_tensor(&[2, 4, 4], 1, -1.0, 1.0),
                random_tensor(&[3, 3, 3], 2, -1.0, 1.0),
                random_tensor(&[2, 6], 3, -1.0, 1.0),
                random_tensor(&[2], 4, -1.0, 1.0),
            ];
            grad_check_many(|_, v| Ok(probe(gabor_branch(v[0], v[1], v[2], v[3])?, 5)?), &ins, o)
        }),
        case!("spectral_msa", Primitive, |o| spectral_msa_case(o, AttnScale::InverseTokens, 1)),
        case!("spectral_msa_unscaled", Primitive, |o| spectral_msa_case(o, AttnScale::None, 1)),
        case!("spectral_msa_2heads", Primitive, |o| spectral_msa_case(o, AttnScale::InverseTokens, 2)),
    ]
}

fn spectral_msa_case(opts: &CheckOptions, scale: AttnScale, heads: usize) -> Result<GradReport> {
    let ins = [
        random_tensor(&[4, 3, 3], 1, -1.0, 1.0),
        random_tensor(&[4, 4], 2, -0.5, 0.5),
        random_tensor(&[4, 4], 3, -0.5, 0.5),
        random_tensor(&[4, 4], 4, -0.5, 0.5),
    ];
    grad_check_many(
        |_, v| {
            let p = MsaParams { wq: v[1], wk: v[2], wv: v[3], heads, scale };
            Ok(probe(spectral_msa(v[0], &p)?, 5)?)
        },
        &ins,
        opts,
    )
}

fn layer_cases() -> Vec<GradCase> {
    vec![
        case!("nukes_layer", Layer, |o| {
            let layer = NukesLayer::new("n", 4, small_nukes());
            let ps = jittered(&layer.param_specs(), 3)?;
            with_params(o, &ps, vec![random_tensor(&[4, 3, 3], 1, -2.0, 2.0)], |b, v| Ok(probe(layer.forward(b, v[0])?, 6)?))
        }),
        case!("nukes_layer_fixed_knots", Layer, |o| {
            let layer = NukesLayer::new("n", 4, NukesConfig { adaptive: false, ..small_nukes() });
            let ps = jittered(&layer.param_specs(), 3)?;
            with_params(o, &ps, vec![random_tensor(&[4, 3, 3], 1, -2.0, 2.0)], |b, v| Ok(probe(layer.forward(b, v[0])?, 6)?))
        }),
        case!("gmsa", Layer, |o| {
            let g = Gmsa::new("g", 4, small_gmsa());
            let ps = jittered(&g.param_specs(), 3)?;
            with_params(o, &ps, vec![random_tensor(&[4, 4, 4], 1, -1.0, 1.0)], |b, v| Ok(probe(g.forward(b, v[0])?, 6)?))
        }),
        case!("gmsa_no_gabor", Layer, |o| {
            let g = Gmsa::new("g", 4, GmsaConfig { use_gabor: false, ..small_gmsa() });
            let ps = jittered(&g.param_specs(), 3)?;
            with_params(o, &ps, vec![random_tensor(&[4, 4, 4], 1, -1.0, 1.0)], |b, v| Ok(probe(g.forward(b, v[0])?, 6)?))
        }),
        case!("nuk_msa_block", Layer, |o| {
            let blk = NukMsaBlock::new("blk", 4, small_gmsa(), small_nukes());
            let ps = jittered(&blk.param_specs(), 3)?;
            with_params(o, &ps, vec![random_tensor(&[4, 4, 4], 1, -1.0, 1.0)], |b, v| Ok(probe(blk.forward(b, v[0])?, 6)?))
        }),
        case!("projector", Layer, |o| {
            let p = Projector::new("f", 4, 3);
            let ps = jittered(&p.param_specs(), 3)?;
            with_params(o, &ps, vec![random_tensor(&[4, 5], 1, -1.0, 1.0)], |b, v| Ok(probe(p.forward(b, v[0])?, 6)?))
        }),
    ]
}

fn network_cases() -> Vec<GradCase> {
    vec![
        // default generator configuration, RGB to 31 bands at 8x8
        case!("generator", Network, |o| {
            let g = Generator::new("g", "nde", 3, 31, GeneratorConfig::default())?;
            let ps = jittered(&g.param_specs(), 3)?;
            with_params(o, &ps, vec![random_tensor(&[3, 8, 8], 1, 0.0, 1.0)], |b, v| {
                let out = g.forward(b, v[0])?;
                Ok(probe(out.image, 6)?.add(probe(out.features, 7)?)?)
            })
        }),
        case!("generator_bypass", Network, |o| {
            let g = Generator::new("g", "nde", 3, 5, GeneratorConfig { base_channels: 4, ..GeneratorConfig::default() })?;
            let mut specs = g.param_specs();
            specs.extend(g.bypass_specs());
            let ps = jittered(&specs, 3)?;
            with_params(o, &ps, vec![random_tensor(&[5, 8, 8], 1, 0.0, 1.0)], |b, v| Ok(probe(g.bypass(b, v[0])?, 6)?))
        }),
        case!("discriminator", Network, |o| {
            let d = Discriminator::new("d", 5, DiscriminatorConfig::default())?;
            let ps = jittered(&d.param_specs(), 3)?;
            with_params(o, &ps, vec![random_tensor(&[5, 8, 8], 1, 0.0, 1.0)], |b, v| Ok(probe(d.forward(b, v[0])?, 6)?))
        }),
    ]
}

fn loss_cases() -> Vec<GradCase> {
    vec![
        case!("loss_cycle", Loss, |o| model_case(o, |m, b, x, y| {
            let out = cycle_pass(m, b, x, y)?;
            Ok(cycle_loss(x, y, &out)?)
        })),
        case!("loss_non_degraded", Loss, |o| model_case(o, |m, b, x, y| Ok(non_degraded_loss(m, b, x, y)?))),
        case!("loss_adversarial_gen", Loss, |o| model_case(o, |m, b, x, y| {
            let out = cycle_pass(m, b, x, y)?;
            Ok(adversarial_loss(m, b, x, y, out.x_fake.image, out.y_fake.image)?.gen)
        })),
        case!("loss_adversarial_disc", Loss, |o| model_case(o, |m, b, x, y| {
            let out = cycle_pass(m, b, x, y)?;
            Ok(adversarial_loss(m, b, x, y, out.x_fake.image, out.y_fake.image)?.disc)
        })),
        case!("loss_spectral", Loss, |o| model_case(o, |m, b, x, y| {
            let out = cycle_pass(m, b, x, y)?;
            Ok(dcpm_losses(m, b, &out, &sample()?, &DcpmConfig::default())?.0)
        })),
        case!("loss_geometric", Loss, |o| model_case(o, |m, b, x, y| {
            let out = cycle_pass(m, b, x, y)?;
            Ok(dcpm_losses(m, b, &out, &sample()?, &DcpmConfig::default())?.1)
        })),
        case!("loss_total", Loss, |o| model_case(o, |m, b, x, y| {
            let out = cycle_pass(m, b, x, y)?;
            let adv = adversarial_loss(m, b, x, y, out.x_fake.image, out.y_fake.image)?;
            let (spectral, geometric) = dcpm_losses(m, b, &out, &sample()?, &DcpmConfig::default())?;
            let terms = LossTerms {
                cycle: cycle_loss(x, y, &out)?,
                non_degraded: non_degraded_loss(m, b, x, y)?,
                adversarial: adv.gen,
                spectral,
                geometric,
            };
            Ok(total_loss(&terms, &LossWeights::default())?)
        })),
    ]
}

fn sample() -> Result<nukes_core::losses::DcpmSample> {
    Ok(dcpm_sample(64, 6, 5, 9)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nukes_core::gradcore::Tape;
    use std::rc::Rc;

    #[test]
    fn names_are_unique() {
        let reg = registry();
        let mut names: Vec<_> = reg.iter().map(|c| c.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), reg.len());
    }

    /// `y = 2x` whose backward claims `dy/dx = 3`.
    fn broken_double(opts: &CheckOptions) -> Result<GradReport> {
        let x = random_tensor(&[4], 1, -1.0, 1.0);
        grad_check_many(
            |tape: &Tape, v| {
                let y = v[0].value().map(|a| 2.0 * a);
                let var = tape.record(
                    "broken_double",
                    &[v[0]],
                    Rc::new(y),
                    Box::new(|g, _| vec![Some(g.map(|a| 3.0 * a))]),
                )?;
                Ok(probe(var, 1)?)
            },
            &[x],
            opts,
        )
    }

    #[test]
    fn corrupted_backward_is_reported_by_name() {
        let mut cases = select("exp");
        cases.push(GradCase {
            name: "broken_double",
            kind: CaseKind::Primitive,
            run: broken_double,
        });
        let rep = run_cases(&cases, &CheckOptions::default());
        let failed: Vec<_> = rep.failures().iter().map(|r| r.name.clone()).collect();
        assert_eq!(failed, ["broken_double"]);
        assert!(rep.lines().iter().any(|l| l.starts_with("FAIL") && l.contains("broken_double")));
    }

    #[test]
    fn primitives_pass() {
        let rep = run_cases(&primitive_cases(), &suite_options());
        assert!(rep.passed(), "{:#?}", rep.failures());
    }
}
