//! Non-uniform knot and control-point generation.
//!
//! Interior knots come from a softplus cumulative sum of raw increments,
//! rescaled so the domain is exactly `[-r, r]`, with both ends clamped at
//! multiplicity `p + 1`. The increments stay strictly positive, so the
//! knots are ordered for any raw parameters.

use serde::{Deserialize, Serialize};

use super::basis::MAX_DEGREE;
use super::{NukesError, Result};
use crate::gradcore::ops::{sigmoid, softplus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NcpgConfig {
    pub degree: usize,
    pub interior_knots: usize,
    pub radius: f64,
}

impl Default for NcpgConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            interior_knots: 8,
            radius: 4.0,
        }
    }
}

impl NcpgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.degree > MAX_DEGREE {
            return Err(NukesError::DegreeUnsupported {
                degree: self.degree,
                max: MAX_DEGREE,
            });
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(NukesError::InvalidKnots(format!("radius {}", self.radius)));
        }
        Ok(())
    }

    /// Raw increments per spline: one per interior knot plus the last gap.
    pub fn n_increments(&self) -> usize {
        self.interior_knots + 1
    }

    pub fn n_knots(&self) -> usize {
        self.interior_knots + 2 * (self.degree + 1)
    }

    pub fn n_basis(&self) -> usize {
        self.interior_knots + self.degree + 1
    }
}

/// Running sums `S_0 = 0, S_j = sum_{i<j} softplus(raw_i)` before rescaling.
pub fn cumulative_positions(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len() + 1);
    let mut s = 0.0;
    out.push(0.0);
    for &r in raw {
        s += softplus(r);
        out.push(s);
    }
    out
}

pub fn ncpg_knots(raw: &[f64], cfg: &NcpgConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if raw.len() != cfg.n_increments() {
        return Err(NukesError::ShapeMismatch(format!(
            "expected {} knot increments, got {}",
            cfg.n_increments(),
            raw.len()
        )));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(NukesError::InvalidKnots("non-finite raw increment".into()));
    }
    let r = cfg.radius;
    let s = cumulative_positions(raw);
    let total = s[s.len() - 1];
    let mut knots = vec![-r; cfg.degree + 1];
    for &sj in &s[1..s.len() - 1] {
        knots.push(-r + 2.0 * r * sj / total);
    }
    knots.extend(std::iter::repeat_n(r, cfg.degree + 1));
    Ok(knots)
}

/// Knots from the raw increments, control points passed through unchanged.
pub fn ncpg_generate(raw_increments: &[f64], raw_control: &[f64], cfg: &NcpgConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let knots = ncpg_knots(raw_increments, cfg)?;
    if raw_control.len() != cfg.n_basis() {
        return Err(NukesError::ShapeMismatch(format!(
            "expected {} control points, got {}",
            cfg.n_basis(),
            raw_control.len()
        )));
    }
    Ok((knots, raw_control.to_vec()))
}

/// Clamped knots with uniformly spaced interior knots.
pub fn uniform_knots(cfg: &NcpgConfig) -> Vec<f64> {
    ncpg_knots(&vec![0.0; cfg.n_increments()], cfg).expect("zero increments are valid")
}

/// `J[j][i] = d t_{p+1+j} / d raw_i` for interior knot `j`.
pub fn knot_jacobian(raw: &[f64], cfg: &NcpgConfig) -> Vec<Vec<f64>> {
    let s = cumulative_positions(raw);
    let k = raw.len();
    let total = s[k];
    let r2 = 2.0 * cfg.radius;
    (0..cfg.interior_knots)
        .map(|j| {
            let sj = s[j + 1];
            (0..k)
                .map(|i| {
                    let ind = if i <= j { 1.0 } else { 0.0 };
                    r2 * (ind * total - sj) / (total * total) * sigmoid(raw[i])
                })
                .collect()
        })
        .collect()
}

/// Greville abscissae; control points placed there make the curve the
/// identity map.
pub fn greville(p: usize, knots: &[f64]) -> Vec<f64> {
    let n = knots.len() - p - 1;
    (0..n)
        .map(|i| {
            if p == 0 {
                0.5 * (knots[i] + knots[i + 1])
            } else {
                knots[i + 1..=i + p].iter().sum::<f64>() / p as f64
            }
        })
        .collect()
}
