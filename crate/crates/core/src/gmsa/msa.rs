use serde::{Deserialize, Serialize};

use super::{GmsaError, Result};
use crate::gradcore::Var;

/// Scaling of the `C x C` score matrix before the softmax.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttnScale {
    /// Raw `K^T Q`.
    None,
    /// `K^T Q / (H W)`: scores become spatial means and stay O(1) regardless
    /// of image size.
    #[default]
    InverseTokens,
}

/// Bound projection weights (`[C, C]` each) for one attention call.
#[derive(Clone, Copy, Debug)]
pub struct MsaParams<'t> {
    pub wq: Var<'t>,
    pub wk: Var<'t>,
    pub wv: Var<'t>,
    pub heads: usize,
    pub scale: AttnScale,
}

/// Output, value map and per-head attention of one spectral attention call.
pub struct MsaOutput<'t> {
    pub out: Var<'t>,
    /// `V` as `[C, H, W]`, shared with the Gabor branch.
    pub v: Var<'t>,
    /// Per-head `[c_h, c_h]` column-stochastic matrices.
    pub attention: Vec<Var<'t>>,
}

/// Spectral attention on `[C, H, W]`: with `Q, K, V` the channel projections
/// flattened to `[C, HW]`, `A = softmax_0(K Q^T)` and the output is `A^T V`,
/// i.e. each output channel is a convex mix of value channels.
pub fn spectral_msa_with_attention<'t>(x: Var<'t>, p: &MsaParams<'t>) -> Result<MsaOutput<'t>> {
    let shape = x.shape();
    let (c, h, w) = match shape[..] {
        [c, h, w] => (c, h, w),
        _ => return Err(GmsaError::ShapeMismatch(format!("expected [C,H,W], got {shape:?}"))),
    };
    if p.heads == 0 || c % p.heads != 0 {
        return Err(GmsaError::ShapeMismatch(format!("{c} channels not divisible by {} heads", p.heads)));
    }
    for (name, wt) in [("wq", p.wq), ("wk", p.wk), ("wv", p.wv)] {
        if wt.shape() != [c, c] {
            return Err(GmsaError::ShapeMismatch(format!("{name} {:?}, want [{c}, {c}]", wt.shape())));
        }
    }
    let n = h * w;
    let xm = x.reshape(&[c, n])?;
    let q = xm.conv1x1(p.wq, None)?;
    let k = xm.conv1x1(p.wk, None)?;
    let v = xm.conv1x1(p.wv, None)?;
    let ch = c / p.heads;
    let mut outs = Vec::with_capacity(p.heads);
    let mut attention = Vec::with_capacity(p.heads);
    for head in 0..p.heads {
        let (lo, hi) = (head * ch, (head + 1) * ch);
        let (qh, kh, vh) = if p.heads == 1 {
            (q, k, v)
        } else {
            (q.slice(lo, hi)?, k.slice(lo, hi)?, v.slice(lo, hi)?)
        };
        let mut s = kh.matmul(qh.transpose()?)?;
        if p.scale == AttnScale::InverseTokens {
            s = s.scale(1.0 / n as f64)?;
        }
        let a = s.softmax(0)?;
        outs.push(a.transpose()?.matmul(vh)?);
        attention.push(a);
    }
    let out = if outs.len() == 1 { outs[0] } else { Var::concat(&outs)? };
    Ok(MsaOutput {
        out: out.reshape(&[c, h, w])?,
        v: v.reshape(&[c, h, w])?,
        attention,
    })
}

pub fn spectral_msa<'t>(x: Var<'t>, p: &MsaParams<'t>) -> Result<Var<'t>> {
    Ok(spectral_msa_with_attention(x, p)?.out)
}
