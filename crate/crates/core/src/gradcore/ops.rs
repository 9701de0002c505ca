//! Primitive ops. Each one computes its forward value eagerly and records a
//! closure that maps the output cotangent to input cotangents.

use std::rc::Rc;

use super::{shape_err, Result, Tensor, Var};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

fn t(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).expect("op produced a consistent shape")
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mirror index without edge repetition; folds repeatedly so any offset is
/// valid even when the pad exceeds the image size.
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

impl<'t> Var<'t> {
    fn unary(
        self,
        op: &'static str,
        f: impl Fn(f64) -> f64,
        dfdx: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Result<Var<'t>> {
        let xv = self.value();
        let y = Rc::new(xv.map(f));
        let yc = Rc::clone(&y);
        self.tape().record(
            op,
            &[self],
            y,
            Box::new(move |g, _| {
                let data = g
                    .data()
                    .iter()
                    .zip(xv.data())
                    .zip(yc.data())
                    .map(|((g, &x), &y)| g * dfdx(x, y))
                    .collect();
                vec![Some(t(g.shape(), data))]
            }),
        )
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("add", &a, &b)?;
        let y = a.zip_map(&b, |x, y| x + y);
        self.tape().record(
            "add",
            &[self, other],
            Rc::new(y),
            Box::new(|g, _| vec![Some(g.clone()), Some(g.clone())]),
        )
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("sub", &a, &b)?;
        let y = a.zip_map(&b, |x, y| x - y);
        self.tape().record(
            "sub",
            &[self, other],
            Rc::new(y),
            Box::new(|g, _| vec![Some(g.clone()), Some(g.map(|v| -v))]),
        )
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("mul", &a, &b)?;
        let y = a.zip_map(&b, |x, y| x * y);
        self.tape().record(
            "mul",
            &[self, other],
            Rc::new(y),
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.zip_map(&b, |g, b| g * b)),
                    need[1].then(|| g.zip_map(&a, |g, a| g * a)),
                ]
            }),
        )
    }

    /// Multiplies every element by a one-element tensor.
    pub fn mul_scalar(self, s: Var<'t>) -> Result<Var<'t>> {
        let (x, sv) = (self.value(), s.value());
        if sv.numel() != 1 {
            return Err(shape_err("mul_scalar", format!("scalar has shape {:?}", sv.shape())));
        }
        let k = sv.data()[0];
        let y = x.map(|v| v * k);
        let sshape = sv.shape().to_vec();
        self.tape().record(
            "mul_scalar",
            &[self, s],
            Rc::new(y),
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| g.map(|v| v * k)),
                    need[1].then(|| {
                        let d: f64 = g.data().iter().zip(x.data()).map(|(g, x)| g * x).sum();
                        t(&sshape, vec![d])
                    }),
                ]
            }),
        )
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        self.unary("scale", |x| c * x, move |_, _| c)
    }

    pub fn add_const(self, c: f64) -> Result<Var<'t>> {
        self.unary("add_const", |x| x + c, |_, _| 1.0)
    }

    pub fn neg(self) -> Result<Var<'t>> {
        self.scale(-1.0)
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.unary("exp", f64::exp, |_, y| y)
    }

    pub fn log(self) -> Result<Var<'t>> {
        self.unary("log", f64::ln, |x, _| 1.0 / x)
    }

    pub fn sigmoid(self) -> Result<Var<'t>> {
        self.unary("sigmoid", sigmoid, |_, y| y * (1.0 - y))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(self) -> Result<Var<'t>> {
        self.unary("gelu", gelu, |x, _| gelu_grad(x))
    }

    pub fn softplus(self) -> Result<Var<'t>> {
        self.unary("softplus", softplus, |x, _| sigmoid(x))
    }

    pub fn leaky_relu(self, slope: f64) -> Result<Var<'t>> {
        self.unary(
            "leaky_relu",
            move |x| if x > 0.0 { x } else { slope * x },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    /// `acos` on `[-1, 1]`; inputs are clamped and the derivative is capped
    /// near the endpoints, where it diverges.
    pub fn acos(self) -> Result<Var<'t>> {
        self.unary(
            "acos",
            |x| x.clamp(-1.0, 1.0).acos(),
            |x, _| -1.0 / (1.0 - x * x).max(1e-12).sqrt(),
        )
    }

    pub fn sqrt(self) -> Result<Var<'t>> {
        self.unary("sqrt", f64::sqrt, |_, y| 0.5 / y)
    }

    pub fn square(self) -> Result<Var<'t>> {
        self.unary("square", |x| x * x, |x, _| 2.0 * x)
    }

    pub fn pow(self, p: f64) -> Result<Var<'t>> {
        self.unary("pow", move |x| x.powf(p), move |x, _| p * x.powf(p - 1.0))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping is active.
    pub fn clamp(self, lo: f64, hi: f64) -> Result<Var<'t>> {
        self.unary(
            "clamp",
            move |x| x.clamp(lo, hi),
            move |x, _| if x < lo || x > hi { 0.0 } else { 1.0 },
        )
    }

    pub fn sum(self) -> Result<Var<'t>> {
        let x = self.value();
        let shape = x.shape().to_vec();
        let s = x.sum();
        self.tape().record(
            "sum",
            &[self],
            Rc::new(Tensor::scalar(s)),
            Box::new(move |g, _| vec![Some(Tensor::full(shape.clone(), g.data()[0]))]),
        )
    }

    pub fn mean(self) -> Result<Var<'t>> {
        let n = self.value().numel() as f64;
        self.sum()?.scale(1.0 / n)
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Var<'t>> {
        let x = self.value();
        let old = x.shape().to_vec();
        let y = (*x).clone().reshape(shape.to_vec())?;
        self.tape().record(
            "reshape",
            &[self],
            Rc::new(y),
            Box::new(move |g, _| vec![Some(t(&old, g.data().to_vec()))]),
        )
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let x = self.value();
        let (r, c) = x.dims2()?;
        let y = transpose2(x.data(), r, c);
        self.tape().record(
            "transpose",
            &[self],
            Rc::new(t(&[c, r], y)),
            Box::new(move |g, _| vec![Some(t(&[r, c], transpose2(g.data(), c, r)))]),
        )
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        let (m, k) = a.dims2()?;
        let (k2, n) = b.dims2()?;
        if k != k2 {
            return Err(shape_err("matmul", format!("[{m},{k}] x [{k2},{n}]")));
        }
        let y = matmul_raw(a.data(), b.data(), m, k, n);
        self.tape().record(
            "matmul",
            &[self, other],
            Rc::new(t(&[m, n], y)),
            Box::new(move |g, need| {
                // g [m,n] * b^T [n,k]
                let ga = need[0].then(|| t(&[m, k], matmul_nt(g.data(), b.data(), m, k, n)));
                let gb = need[1].then(|| {
                    let at = transpose2(a.data(), m, k);
                    t(&[k, n], matmul_raw(&at, g.data(), k, m, n))
                });
                vec![ga, gb]
            }),
        )
    }

    /// Softmax of a rank-2 tensor. `axis = 0` normalizes each column.
    pub fn softmax(self, axis: usize) -> Result<Var<'t>> {
        let x = self.value();
        let (r, c) = x.dims2()?;
        if axis > 1 {
            return Err(shape_err("softmax", format!("axis {axis} on rank 2")));
        }
        let (outer, inner, stride_o, stride_i) = if axis == 0 { (c, r, 1, c) } else { (r, c, c, 1) };
        let mut y = vec![0.0; r * c];
        let xd = x.data();
        for o in 0..outer {
            let base = o * stride_o;
            let mx = (0..inner)
                .map(|i| xd[base + i * stride_i])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for i in 0..inner {
                let e = (xd[base + i * stride_i] - mx).exp();
                y[base + i * stride_i] = e;
                z += e;
            }
            for i in 0..inner {
                y[base + i * stride_i] /= z;
            }
        }
        let y = Rc::new(t(&[r, c], y));
        let yc = Rc::clone(&y);
        self.tape().record(
            "softmax",
            &[self],
            y,
            Box::new(move |g, _| {
                let (gd, yd) = (g.data(), yc.data());
                let mut gx = vec![0.0; r * c];
                for o in 0..outer {
                    let base = o * stride_o;
                    let dot: f64 = (0..inner)
                        .map(|i| gd[base + i * stride_i] * yd[base + i * stride_i])
                        .sum();
                    for i in 0..inner {
                        let j = base + i * stride_i;
                        gx[j] = yd[j] * (gd[j] - dot);
                    }
                }
                vec![Some(t(&[r, c], gx))]
            }),
        )
    }

    /// Concatenation along the leading axis.
    pub fn concat(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| shape_err("concat", "no inputs"))?;
        let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let tail = values[0].shape()[1..].to_vec();
        let mut lead = 0;
        let mut data = Vec::new();
        let mut sizes = Vec::with_capacity(values.len());
        for v in &values {
            if v.shape()[1..] != tail[..] {
                return Err(shape_err(
                    "concat",
                    format!("{:?} vs {:?}", v.shape(), values[0].shape()),
                ));
            }
            lead += v.shape()[0];
            sizes.push(v.shape().to_vec());
            data.extend_from_slice(v.data());
        }
        let mut shape = vec![lead];
        shape.extend_from_slice(&tail);
        first.tape().record(
            "concat",
            parts,
            Rc::new(t(&shape, data)),
            Box::new(move |g, need| {
                let mut off = 0;
                sizes
                    .iter()
                    .zip(need)
                    .map(|(s, &n)| {
                        let len: usize = s.iter().product();
                        let part = n.then(|| t(s, g.data()[off..off + len].to_vec()));
                        off += len;
                        part
                    })
                    .collect()
            }),
        )
    }

    /// Rows `start..end` of the leading axis.
    pub fn slice(self, start: usize, end: usize) -> Result<Var<'t>> {
        let x = self.value();
        let lead = x.shape()[0];
        if start >= end || end > lead {
            return Err(shape_err("slice", format!("{start}..{end} of {lead}")));
        }
        let row: usize = x.shape()[1..].iter().product();
        let mut shape = x.shape().to_vec();
        shape[0] = end - start;
        let full = x.shape().to_vec();
        let y = x.data()[start * row..end * row].to_vec();
        self.tape().record(
            "slice",
            &[self],
            Rc::new(t(&shape, y)),
            Box::new(move |g, _| {
                let mut gx = Tensor::zeros(full.clone());
                gx.data_mut()[start * row..end * row].copy_from_slice(g.data());
                vec![Some(gx)]
            }),
        )
    }

    /// Columns `idx` of a `[d, n]` matrix.
    pub fn select_cols(self, idx: &[usize]) -> Result<Var<'t>> {
        let x = self.value();
        let (d, n) = x.dims2()?;
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(shape_err("select_cols", format!("column {bad} of {n}")));
        }
        let idx = idx.to_vec();
        let k = idx.len();
        let mut y = vec![0.0; d * k];
        for r in 0..d {
            for (j, &c) in idx.iter().enumerate() {
                y[r * k + j] = x.data()[r * n + c];
            }
        }
        self.tape().record(
            "select_cols",
            &[self],
            Rc::new(t(&[d, k], y)),
            Box::new(move |g, _| {
                let mut gx = vec![0.0; d * n];
                for r in 0..d {
                    for (j, &c) in idx.iter().enumerate() {
                        gx[r * n + c] += g.data()[r * k + j];
                    }
                }
                vec![Some(t(&[d, n], gx))]
            }),
        )
    }

    /// Layer normalization across the leading (channel) axis at every
    /// position, followed by a per-channel affine map.
    pub fn layer_norm(self, gamma: Var<'t>, beta: Var<'t>, eps: f64) -> Result<Var<'t>> {
        let x = self.value();
        let (gm, bt) = (gamma.value(), beta.value());
        let c = x.shape()[0];
        let n = x.numel() / c;
        if gm.numel() != c || bt.numel() != c {
            return Err(shape_err("layer_norm", format!("{c} channels, affine {:?}", gm.shape())));
        }
        let xd = x.data();
        let mut xhat = vec![0.0; c * n];
        let mut inv_std = vec![0.0; n];
        for p in 0..n {
            let mu = (0..c).map(|ch| xd[ch * n + p]).sum::<f64>() / c as f64;
            let var = (0..c).map(|ch| (xd[ch * n + p] - mu).powi(2)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[p] = is;
            for ch in 0..c {
                xhat[ch * n + p] = (xd[ch * n + p] - mu) * is;
            }
        }
        let mut y = vec![0.0; c * n];
        for ch in 0..c {
            for p in 0..n {
                y[ch * n + p] = gm.data()[ch] * xhat[ch * n + p] + bt.data()[ch];
            }
        }
        let shape = x.shape().to_vec();
        let yshape = shape.clone();
        self.tape().record(
            "layer_norm",
            &[self, gamma, beta],
            Rc::new(t(&yshape, y)),
            Box::new(move |g, need| {
                let gd = g.data();
                let gx = need[0].then(|| {
                    let mut gx = vec![0.0; c * n];
                    for p in 0..n {
                        let mut m1 = 0.0;
                        let mut m2 = 0.0;
                        for ch in 0..c {
                            let dxh = gd[ch * n + p] * gm.data()[ch];
                            m1 += dxh;
                            m2 += dxh * xhat[ch * n + p];
                        }
                        m1 /= c as f64;
                        m2 /= c as f64;
                        for ch in 0..c {
                            let dxh = gd[ch * n + p] * gm.data()[ch];
                            gx[ch * n + p] = inv_std[p] * (dxh - m1 - xhat[ch * n + p] * m2);
                        }
                    }
                    t(&shape, gx)
                });
                let gg = need[1].then(|| {
                    let d = (0..c)
                        .map(|ch| (0..n).map(|p| gd[ch * n + p] * xhat[ch * n + p]).sum())
                        .collect();
                    t(&[c], d)
                });
                let gb = need[2].then(|| {
                    let d = (0..c).map(|ch| gd[ch * n..(ch + 1) * n].iter().sum()).collect();
                    t(&[c], d)
                });
                vec![gx, gg, gb]
            }),
        )
    }

    /// Global average pooling of `[c, h, w]` to `[c]`.
    pub fn global_avg_pool(self) -> Result<Var<'t>> {
        let x = self.value();
        let c = x.shape()[0];
        let n = x.numel() / c;
        let y = (0..c)
            .map(|ch| x.data()[ch * n..(ch + 1) * n].iter().sum::<f64>() / n as f64)
            .collect();
        let shape = x.shape().to_vec();
        self.tape().record(
            "global_avg_pool",
            &[self],
            Rc::new(t(&[c], y)),
            Box::new(move |g, _| {
                let mut gx = Tensor::zeros(shape.clone());
                for ch in 0..c {
                    let v = g.data()[ch] / n as f64;
                    gx.data_mut()[ch * n..(ch + 1) * n].fill(v);
                }
                vec![Some(gx)]
            }),
        )
    }

    /// Pointwise channel map: `[cin, ...] -> [cout, ...]` with weight
    /// `[cout, cin]` and optional bias `[cout]`.
    pub fn conv1x1(self, w: Var<'t>, b: Option<Var<'t>>) -> Result<Var<'t>> {
        let (x, wv) = (self.value(), w.value());
        let (cout, cin) = wv.dims2()?;
        if x.shape()[0] != cin {
            return Err(shape_err("conv1x1", format!("input {:?}, weight [{cout},{cin}]", x.shape())));
        }
        let bv = b.map(|b| b.value());
        if let Some(bv) = &bv {
            if bv.numel() != cout {
                return Err(shape_err("conv1x1", format!("bias {:?} for {cout} outputs", bv.shape())));
            }
        }
        let n = x.numel() / cin;
        let mut y = matmul_raw(wv.data(), x.data(), cout, cin, n);
        if let Some(bv) = &bv {
            for o in 0..cout {
                let bo = bv.data()[o];
                y[o * n..(o + 1) * n].iter_mut().for_each(|v| *v += bo);
            }
        }
        let mut shape = x.shape().to_vec();
        shape[0] = cout;
        let xshape = x.shape().to_vec();
        let mut parents = vec![self, w];
        parents.extend(b);
        let has_bias = b.is_some();
        self.tape().record(
            "conv1x1",
            &parents,
            Rc::new(t(&shape, y)),
            Box::new(move |g, need| {
                let gx = need[0].then(|| {
                    let wt = transpose2(wv.data(), cout, cin);
                    t(&xshape, matmul_raw(&wt, g.data(), cin, cout, n))
                });
                let gw = need[1].then(|| t(&[cout, cin], matmul_nt(g.data(), x.data(), cout, cin, n)));
                let mut out = vec![gx, gw];
                if has_bias {
                    out.push(need[2].then(|| {
                        let d = (0..cout).map(|o| g.data()[o * n..(o + 1) * n].iter().sum()).collect();
                        t(&[cout], d)
                    }));
                }
                out
            }),
        )
    }

    /// Dense 2-D convolution with zero padding: `[cin, h, w]` with weight
    /// `[cout, cin, k, k]`.
    pub fn conv2d(self, w: Var<'t>, b: Option<Var<'t>>, stride: usize, pad: usize) -> Result<Var<'t>> {
        let (x, wv) = (self.value(), w.value());
        let (cin, h, wd) = x.dims3()?;
        let (cout, cin2, k, k2) = match wv.shape()[..] {
            [a, b, c, d] => (a, b, c, d),
            _ => return Err(shape_err("conv2d", format!("weight {:?}", wv.shape()))),
        };
        if cin != cin2 || k != k2 || stride == 0 || h + 2 * pad < k || wd + 2 * pad < k {
            return Err(shape_err("conv2d", format!("input {:?}, weight {:?}", x.shape(), wv.shape())));
        }
        let ho = (h + 2 * pad - k) / stride + 1;
        let wo = (wd + 2 * pad - k) / stride + 1;
        let bv = b.map(|b| b.value());
        let xd = x.data();
        let wdta = wv.data();
        let mut y = vec![0.0; cout * ho * wo];
        // visit (output, input, tap) triples; `f` receives flat indices
        let walk = move |f: &mut dyn FnMut(usize, usize, usize)| {
            for o in 0..cout {
                for i in 0..cin {
                    for ky in 0..k {
                        for kx in 0..k {
                            let widx = ((o * cin + i) * k + ky) * k + kx;
                            for oy in 0..ho {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for ox in 0..wo {
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if ix < 0 || ix >= wd as isize {
                                        continue;
                                    }
                                    let xidx = (i * h + iy as usize) * wd + ix as usize;
                                    f((o * ho + oy) * wo + ox, xidx, widx);
                                }
                            }
                        }
                    }
                }
            }
        };
        walk(&mut |yi, xi, wi| y[yi] += wdta[wi] * xd[xi]);
        if let Some(bv) = &bv {
            for o in 0..cout {
                let bo = bv.data()[o];
                y[o * ho * wo..(o + 1) * ho * wo].iter_mut().for_each(|v| *v += bo);
            }
        }
        let xshape = x.shape().to_vec();
        let wshape = wv.shape().to_vec();
        let has_bias = b.is_some();
        let mut parents = vec![self, w];
        parents.extend(b);
        self.tape().record(
            "conv2d",
            &parents,
            Rc::new(t(&[cout, ho, wo], y)),
            Box::new(move |g, need| {
                let gd = g.data();
                let mut gx = need[0].then(|| vec![0.0; xshape.iter().product()]);
                let mut gw = need[1].then(|| vec![0.0; wshape.iter().product()]);
                walk(&mut |yi, xi, wi| {
                    if let Some(gx) = gx.as_mut() {
                        gx[xi] += gd[yi] * wv.data()[wi];
                    }
                    if let Some(gw) = gw.as_mut() {
                        gw[wi] += gd[yi] * x.data()[xi];
                    }
                });
                let mut out = vec![gx.map(|d| t(&xshape, d)), gw.map(|d| t(&wshape, d))];
                if has_bias {
                    out.push(need[2].then(|| {
                        let n = ho * wo;
                        t(&[cout], (0..cout).map(|o| gd[o * n..(o + 1) * n].iter().sum()).collect())
                    }));
                }
                out
            }),
        )
    }

    /// Applies each of `m` kernels `[m, k, k]` to every channel of
    /// `[c, h, w]` with reflect padding. Output channel `c * m + j` holds
    /// channel `c` filtered by kernel `j`.
    pub fn conv2d_depthwise(self, kernels: Var<'t>) -> Result<Var<'t>> {
        let (x, kv) = (self.value(), kernels.value());
        let (c, h, w) = x.dims3()?;
        let (m, k, k2) = kv.dims3()?;
        if k != k2 || k % 2 == 0 {
            return Err(shape_err("conv2d_depthwise", format!("kernel {:?}", kv.shape())));
        }
        let r = (k / 2) as isize;
        // reflect-padded planes, so every tap reads a contiguous row
        let (ph, pw) = (h + k - 1, w + k - 1);
        let pad_index: Vec<usize> = (0..ph as isize)
            .flat_map(|py| (0..pw as isize).map(move |px| reflect(py - r, h) * w + reflect(px - r, w)))
            .collect();
        let plane = h * w;
        let padded: Vec<f64> = (0..c)
            .flat_map(|ch| {
                let src = &x.data()[ch * plane..(ch + 1) * plane];
                pad_index.iter().map(move |&i| src[i])
            })
            .collect();
        let pplane = ph * pw;
        let mut y = vec![0.0; c * m * plane];
        for ch in 0..c {
            let src = &padded[ch * pplane..(ch + 1) * pplane];
            for j in 0..m {
                let ker = &kv.data()[j * k * k..(j + 1) * k * k];
                let dst = &mut y[(ch * m + j) * plane..(ch * m + j + 1) * plane];
                for oy in 0..h {
                    let drow = &mut dst[oy * w..(oy + 1) * w];
                    for ky in 0..k {
                        let srow = &src[(oy + ky) * pw..(oy + ky + 1) * pw];
                        for kx in 0..k {
                            let kv = ker[ky * k + kx];
                            for (d, s) in drow.iter_mut().zip(&srow[kx..kx + w]) {
                                *d += kv * s;
                            }
                        }
                    }
                }
            }
        }
        let kshape = kv.shape().to_vec();
        self.tape().record(
            "conv2d_depthwise",
            &[self, kernels],
            Rc::new(t(&[c * m, h, w], y)),
            Box::new(move |g, need| {
                let mut gx = need[0].then(|| vec![0.0; c * plane]);
                let mut gk = need[1].then(|| vec![0.0; m * k * k]);
                let mut gpad = vec![0.0; pplane];
                for ch in 0..c {
                    let src = &padded[ch * pplane..(ch + 1) * pplane];
                    gpad.fill(0.0);
                    for j in 0..m {
                        let ker = &kv.data()[j * k * k..(j + 1) * k * k];
                        let gout = &g.data()[(ch * m + j) * plane..(ch * m + j + 1) * plane];
                        for oy in 0..h {
                            let grow = &gout[oy * w..(oy + 1) * w];
                            for ky in 0..k {
                                let base = (oy + ky) * pw;
                                for kx in 0..k {
                                    if let Some(gk) = gk.as_mut() {
                                        let srow = &src[base + kx..base + kx + w];
                                        gk[j * k * k + ky * k + kx] +=
                                            grow.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
                                    }
                                    if gx.is_some() {
                                        let kv = ker[ky * k + kx];
                                        for (d, go) in gpad[base + kx..base + kx + w].iter_mut().zip(grow) {
                                            *d += kv * go;
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if let Some(gx) = gx.as_mut() {
                        let dst = &mut gx[ch * plane..(ch + 1) * plane];
                        for (gp, &i) in gpad.iter().zip(&pad_index) {
                            dst[i] += gp;
                        }
                    }
                }
                vec![gx.map(|d| t(&[c, h, w], d)), gk.map(|d| t(&kshape, d))]
            }),
        )
    }

    /// 2x2 average pooling with stride 2.
    pub fn avg_pool2(self) -> Result<Var<'t>> {
        let x = self.value();
        let (c, h, w) = x.dims3()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(shape_err("avg_pool2", format!("odd spatial size {h}x{w}")));
        }
        let (ho, wo) = (h / 2, w / 2);
        let xd = x.data();
        let mut y = vec![0.0; c * ho * wo];
        for ch in 0..c {
            for oy in 0..ho {
                for ox in 0..wo {
                    let b = ch * h * w;
                    y[(ch * ho + oy) * wo + ox] = 0.25
                        * (xd[b + 2 * oy * w + 2 * ox]
                            + xd[b + 2 * oy * w + 2 * ox + 1]
                            + xd[b + (2 * oy + 1) * w + 2 * ox]
                            + xd[b + (2 * oy + 1) * w + 2 * ox + 1]);
                }
            }
        }
        self.tape().record(
            "avg_pool2",
            &[self],
            Rc::new(t(&[c, ho, wo], y)),
            Box::new(move |g, _| {
                let mut gx = vec![0.0; c * h * w];
                for ch in 0..c {
                    for iy in 0..h {
                        for ix in 0..w {
                            gx[(ch * h + iy) * w + ix] = 0.25 * g.data()[(ch * ho + iy / 2) * wo + ix / 2];
                        }
                    }
                }
                vec![Some(t(&[c, h, w], gx))]
            }),
        )
    }

    /// Nearest-neighbour 2x upsampling.
    pub fn upsample2(self) -> Result<Var<'t>> {
        let x = self.value();
        let (c, h, w) = x.dims3()?;
        let (ho, wo) = (2 * h, 2 * w);
        let mut y = vec![0.0; c * ho * wo];
        for ch in 0..c {
            for oy in 0..ho {
                for ox in 0..wo {
                    y[(ch * ho + oy) * wo + ox] = x.data()[(ch * h + oy / 2) * w + ox / 2];
                }
            }
        }
        self.tape().record(
            "upsample2",
            &[self],
            Rc::new(t(&[c, ho, wo], y)),
            Box::new(move |g, _| {
                let mut gx = vec![0.0; c * h * w];
                for ch in 0..c {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            gx[(ch * h + oy / 2) * w + ox / 2] += g.data()[(ch * ho + oy) * wo + ox];
                        }
                    }
                }
                vec![Some(t(&[c, h, w], gx))]
            }),
        )
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let th = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub(crate) fn transpose2(d: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = d[i * c + j];
        }
    }
    out
}

/// `A B^T` for row-major `A: [m, k]`, `B: [n, k]`, as row dot products.
pub(crate) fn matmul_nt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            out[i * n + j] = ar.iter().zip(&b[j * k..(j + 1) * k]).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// `[m, k] x [k, n]` in i-k-j order.
pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}
