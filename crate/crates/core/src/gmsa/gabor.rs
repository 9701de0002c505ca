use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{GmsaError, Result};
use crate::gradcore::{Tensor, Var};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaborConfig {
    /// Number of kernels `M`.
    pub kernels: usize,
    /// Odd kernel side `k`.
    pub size: usize,
    pub sigma: f64,
    /// Use `(y_theta / f)^2` instead of the printed `(y_theta^2 / f)^2`.
    pub alt_form: bool,
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self {
            kernels: 4,
            size: 7,
            sigma: 2.0,
            alt_form: false,
        }
    }
}

impl GaborConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernels == 0 {
            return Err(GmsaError::InvalidParam("need at least one kernel".into()));
        }
        if self.size % 2 == 0 {
            return Err(GmsaError::InvalidParam(format!("kernel size {} must be odd", self.size)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(GmsaError::InvalidParam(format!("sigma {}", self.sigma)));
        }
        Ok(())
    }
}

/// Exponent `e` of `g = exp(-e)` and its partials `(de/df, de/dtheta)`.
fn exponent(x: f64, y: f64, f: f64, theta: f64, sigma: f64, alt: bool) -> (f64, f64, f64) {
    let (s, c) = theta.sin_cos();
    let xt = x * c + y * s;
    let yt = -x * s + y * c;
    let s2 = 2.0 * sigma * sigma;
    // d xt / d theta = yt, d yt / d theta = -xt
    if alt {
        let e = (xt * xt + yt * yt / (f * f)) / s2;
        let de_df = -2.0 * yt * yt / (f * f * f) / s2;
        let de_dth = (2.0 * xt * yt - 2.0 * yt * xt / (f * f)) / s2;
        (e, de_df, de_dth)
    } else {
        let q = yt * yt / f;
        let e = (xt * xt + q * q) / s2;
        let de_df = -2.0 * q * q / f / s2;
        let de_dth = (2.0 * xt * yt - 4.0 * q * yt * xt / f) / s2;
        (e, de_df, de_dth)
    }
}

fn check_scalar(f: f64, sigma: f64, k: usize) -> Result<()> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(GmsaError::InvalidParam(format!("frequency {f}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(GmsaError::InvalidParam(format!("sigma {sigma}")));
    }
    if k % 2 == 0 {
        return Err(GmsaError::InvalidParam(format!("kernel size {k} must be odd")));
    }
    Ok(())
}

/// `exp(-(x_t^2 + (y_t^2 / f)^2) / (2 sigma^2))` on the integer grid
/// centered at 0, row-major with rows indexed by `y`.
pub fn gabor_kernel(f: f64, theta: f64, sigma: f64, k: usize, alt_form: bool) -> Result<Vec<f64>> {
    check_scalar(f, sigma, k)?;
    let r = (k / 2) as isize;
    let mut out = Vec::with_capacity(k * k);
    for y in -r..=r {
        for x in -r..=r {
            out.push((-exponent(x as f64, y as f64, f, theta, sigma, alt_form).0).exp());
        }
    }
    Ok(out)
}

/// Differentiable bank `[M, k, k]` from per-kernel frequencies and
/// orientations (both `[M]`).
pub fn gabor_kernels<'t>(freqs: Var<'t>, theta: Var<'t>, cfg: &GaborConfig) -> Result<Var<'t>> {
    cfg.validate()?;
    let (fv, tv) = (freqs.value(), theta.value());
    let m = fv.numel();
    if tv.numel() != m {
        return Err(GmsaError::ShapeMismatch(format!(
            "{m} frequencies, {} orientations",
            tv.numel()
        )));
    }
    let k = cfg.size;
    let r = (k / 2) as isize;
    let mut vals = Vec::with_capacity(m * k * k);
    let mut d_f = Vec::with_capacity(m * k * k);
    let mut d_th = Vec::with_capacity(m * k * k);
    for j in 0..m {
        let f = fv.data()[j];
        check_scalar(f, cfg.sigma, k)?;
        for y in -r..=r {
            for x in -r..=r {
                let (e, de_df, de_dth) = exponent(x as f64, y as f64, f, tv.data()[j], cfg.sigma, cfg.alt_form);
                let g = (-e).exp();
                vals.push(g);
                d_f.push(-g * de_df);
                d_th.push(-g * de_dth);
            }
        }
    }
    let per = k * k;
    let var = freqs.tape().record(
        "gabor_kernels",
        &[freqs, theta],
        Rc::new(Tensor::new([m, k, k], vals).expect("sized above")),
        Box::new(move |g, _| {
            let fold = |d: &[f64]| -> Tensor {
                let v = (0..m)
                    .map(|j| {
                        (j * per..(j + 1) * per)
                            .map(|i| g.data()[i] * d[i])
                            .sum()
                    })
                    .collect();
                Tensor::new([m], v).expect("m entries")
            };
            vec![Some(fold(&d_f)), Some(fold(&d_th))]
        }),
    )?;
    Ok(var)
}

/// Concrete bank of kernels, for inspection and dumping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaborBank {
    pub config: GaborConfig,
    pub freqs: Vec<f64>,
    pub theta: Vec<f64>,
}

impl GaborBank {
    /// `M` kernels with unit frequency and evenly spread orientations.
    pub fn evenly_spaced(config: GaborConfig) -> Self {
        let m = config.kernels;
        Self {
            freqs: vec![1.0; m],
            theta: (0..m).map(|j| std::f64::consts::PI * j as f64 / m as f64).collect(),
            config,
        }
    }

    pub fn kernels(&self) -> Result<Vec<Vec<f64>>> {
        self.config.validate()?;
        if self.freqs.len() != self.config.kernels || self.theta.len() != self.config.kernels {
            return Err(GmsaError::ShapeMismatch("bank size differs from config".into()));
        }
        self.freqs
            .iter()
            .zip(&self.theta)
            .map(|(&f, &t)| gabor_kernel(f, t, self.config.sigma, self.config.size, self.config.alt_form))
            .collect()
    }
}

/// Depthwise filtering of `v` (`[C, H, W]`) with every kernel of `kernels`
/// (`[M, k, k]`, reflect padding), GELU, then a 1x1 map `wo` (`[C, C*M]`)
/// with bias `bo` back to `C` channels.
pub fn gabor_branch<'t>(v: Var<'t>, kernels: Var<'t>, wo: Var<'t>, bo: Var<'t>) -> Result<Var<'t>> {
    let c = v.shape()[0];
    let m = kernels.shape()[0];
    if wo.shape() != [c, c * m] {
        return Err(GmsaError::ShapeMismatch(format!(
            "output map {:?}, want [{c}, {}]",
            wo.shape(),
            c * m
        )));
    }
    let filtered = v.conv2d_depthwise(kernels)?;
    Ok(filtered.gelu()?.conv1x1(wo, Some(bo))?)
}
