//! Basis derivatives with respect to the evaluation point and the knots,
//! via forward-mode dual numbers through the triangular de Boor scheme.

use std::ops::{Add, Div, Mul, Sub};

use super::basis::MAX_DEGREE;

pub(crate) const TANGENTS: usize = 2 * MAX_DEGREE + 1;

#[derive(Clone, Copy, Debug)]
struct Dual {
    v: f64,
    d: [f64; TANGENTS],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, d: [0.0; TANGENTS] }
    }

    fn seeded(v: f64, slot: usize) -> Self {
        let mut d = [0.0; TANGENTS];
        d[slot] = 1.0;
        Self { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(mut self, o: Dual) -> Dual {
        self.v += o.v;
        for (a, b) in self.d.iter_mut().zip(o.d) {
            *a += b;
        }
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(mut self, o: Dual) -> Dual {
        self.v -= o.v;
        for (a, b) in self.d.iter_mut().zip(o.d) {
            *a -= b;
        }
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        let mut d = [0.0; TANGENTS];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = self.d[k] * o.v + self.v * o.d[k];
        }
        Dual { v: self.v * o.v, d }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        let v = self.v / o.v;
        let mut d = [0.0; TANGENTS];
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = (self.d[k] - v * o.d[k]) / o.v;
        }
        Dual { v, d }
    }
}

/// Active basis values on span `s` together with their partial derivatives.
#[derive(Clone, Debug)]
pub struct BasisDerivs {
    pub span: usize,
    /// `values[j]` is `N_{s-p+j}(x)`.
    pub values: Vec<f64>,
    /// `d_x[j]` is `dN_{s-p+j}/dx`.
    pub d_x: Vec<f64>,
    /// `d_knots[j][q]` is `dN_{s-p+j}/dt_{s-p+1+q}` for `q < 2p`; the active
    /// functions on span `s` depend on no other knot.
    pub d_knots: Vec<Vec<f64>>,
}

impl BasisDerivs {
    /// Global index of the knot behind column `q` of `d_knots`.
    pub fn knot_index(&self, q: usize) -> usize {
        self.span + 2 + q - self.values.len()
    }
}

/// Derivatives of the `p + 1` active basis functions on span `s` at `x`.
/// `s` must be a non-empty span and `p <= MAX_DEGREE`.
pub fn basis_derivatives(p: usize, x: f64, knots: &[f64], s: usize) -> BasisDerivs {
    debug_assert!(p <= MAX_DEGREE && knots[s] < knots[s + 1]);
    let base = s + 1 - p.max(1);
    // knot t_{base+q} is tangent slot q; x is slot 2p
    let knot = |idx: usize| -> Dual {
        if p == 0 {
            Dual::constant(knots[idx])
        } else {
            Dual::seeded(knots[idx], idx - base)
        }
    };
    let xd = Dual::seeded(x, 2 * p);
    let mut n = vec![Dual::constant(0.0); p + 1];
    n[0] = Dual::constant(1.0);
    let mut left = vec![Dual::constant(0.0); p + 1];
    let mut right = vec![Dual::constant(0.0); p + 1];
    for j in 1..=p {
        left[j] = xd - knot(s + 1 - j);
        right[j] = knot(s + j) - xd;
        let mut saved = Dual::constant(0.0);
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    BasisDerivs {
        span: s,
        values: n.iter().map(|d| d.v).collect(),
        d_x: n.iter().map(|d| d.d[2 * p]).collect(),
        d_knots: n.iter().map(|d| d.d[..2 * p].to_vec()).collect(),
    }
}

/// Span matrix (see [`span_matrix`](super::span_matrix)) and its partial
/// derivatives with respect to the knots `t_{s-p+1} .. t_{s+p}`.
#[derive(Clone, Debug)]
pub struct SpanJacobian {
    pub matrix: Vec<f64>,
    /// `d_knots[e][q]` is `dM_e / dt_{s-p+1+q}`, `q < 2p`.
    pub d_knots: Vec<[f64; TANGENTS]>,
}

/// Same recurrence as `span_matrix`, carried out on dual numbers. `s` must be
/// a non-empty span with `p <= s`.
pub fn span_matrix_jacobian(p: usize, knots: &[f64], s: usize) -> SpanJacobian {
    debug_assert!(p <= MAX_DEGREE && knots[s] < knots[s + 1]);
    let base = s + 1 - p.max(1);
    let t = |idx: usize| -> Dual {
        if p == 0 {
            Dual::constant(knots[idx])
        } else {
            Dual::seeded(knots[idx], idx - base)
        }
    };
    let zero = Dual::constant(0.0);
    let h = t(s + 1) - t(s);
    let mut polys: Vec<Vec<Dual>> = vec![vec![Dual::constant(1.0)]];
    for k in 1..=p {
        let mut next = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let i = s + j - k;
            let mut poly = vec![zero; k + 1];
            if j >= 1 && knots[i + k] != knots[i] {
                let d = t(i + k) - t(i);
                let (a, b) = ((t(s) - t(i)) / d, h / d);
                for (e, &c) in polys[j - 1].iter().enumerate() {
                    poly[e] = poly[e] + a * c;
                    poly[e + 1] = poly[e + 1] + b * c;
                }
            }
            if j < k && knots[i + k + 1] != knots[i + 1] {
                let d = t(i + k + 1) - t(i + 1);
                let (a, b) = ((t(i + k + 1) - t(s)) / d, zero - h / d);
                for (e, &c) in polys[j].iter().enumerate() {
                    poly[e] = poly[e] + a * c;
                    poly[e + 1] = poly[e + 1] + b * c;
                }
            }
            next.push(poly);
        }
        polys = next;
    }
    let n = (p + 1) * (p + 1);
    let mut matrix = vec![0.0; n];
    let mut d_knots = vec![[0.0; TANGENTS]; n];
    for (j, poly) in polys.iter().enumerate() {
        for (pow, c) in poly.iter().enumerate() {
            let e = (p - pow) * (p + 1) + j;
            matrix[e] = c.v;
            d_knots[e] = c.d;
        }
    }
    SpanJacobian { matrix, d_knots }
}
