//! B-spline basis functions in recursive (Cox–de Boor) and per-span
//! polynomial matrix form.

use super::{NukesError, Result};

/// Highest degree supported by the matrix form.
pub const MAX_DEGREE: usize = 5;

/// Checks that `knots` is a finite, non-decreasing vector with a non-empty
/// valid domain `[t_p, t_n]` for degree `p`.
pub fn validate_knots(p: usize, knots: &[f64]) -> Result<()> {
    if knots.len() < p + 2 {
        return Err(NukesError::InvalidKnots(format!(
            "degree {p} needs at least {} knots, got {}",
            p + 2,
            knots.len()
        )));
    }
    if knots.iter().any(|k| !k.is_finite()) {
        return Err(NukesError::InvalidKnots("non-finite knot".into()));
    }
    if knots.windows(2).any(|w| w[1] < w[0]) {
        return Err(NukesError::InvalidKnots("knots decrease".into()));
    }
    let n_basis = knots.len() - p - 1;
    if knots[p] >= knots[n_basis] {
        return Err(NukesError::InvalidKnots("empty domain".into()));
    }
    Ok(())
}

/// Number of basis functions of degree `p` on `knots`.
pub fn basis_count(p: usize, knots: &[f64]) -> usize {
    knots.len().saturating_sub(p + 1)
}

/// `N_{i,p}(x)` by the Cox–de Boor recursion with half-open support
/// `[t_i, t_{i+p+1})` and `0/0 = 0`.
pub fn bspline_basis_recursive(i: usize, p: usize, x: f64, knots: &[f64]) -> Result<f64> {
    if i + p + 1 >= knots.len() {
        return Err(NukesError::IndexOutOfRange {
            index: i,
            count: basis_count(p, knots),
        });
    }
    Ok(cox_de_boor(i, p, x, knots))
}

fn cox_de_boor(i: usize, p: usize, x: f64, t: &[f64]) -> f64 {
    if p == 0 {
        return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = t[i + p] - t[i];
    if d1 != 0.0 {
        v += (x - t[i]) / d1 * cox_de_boor(i, p - 1, x, t);
    }
    let d2 = t[i + p + 1] - t[i + 1];
    if d2 != 0.0 {
        v += (t[i + p + 1] - x) / d2 * cox_de_boor(i + 1, p - 1, x, t);
    }
    v
}

/// Index `s` of the knot span `[t_s, t_{s+1})` containing `x`. The right end
/// of the domain belongs to the last non-empty span.
pub fn find_span(p: usize, x: f64, knots: &[f64]) -> Result<usize> {
    let n_basis = basis_count(p, knots);
    let (lo, hi) = (knots[p], knots[n_basis]);
    if !(x >= lo && x <= hi) {
        return Err(NukesError::OutOfDomain { x, lo, hi });
    }
    if x == hi {
        let mut s = n_basis - 1;
        while knots[s] >= knots[s + 1] {
            s -= 1;
        }
        return Ok(s);
    }
    // last s with t_s <= x, restricted to [p, n_basis - 1]
    let upper = knots[..=n_basis].partition_point(|&t| t <= x);
    Ok((upper - 1).clamp(p, n_basis - 1))
}

/// Coefficients of the `p + 1` basis functions active on span `s` as
/// polynomials in `u = (x - t_s) / (t_{s+1} - t_s)`.
///
/// Row-major `(p+1) x (p+1)`: row `r` multiplies `u^(p-r)` and column `j`
/// belongs to `N_{s-p+j}`, so the active basis row is `[u^p, ..., u, 1] * M`.
pub fn span_matrix(p: usize, knots: &[f64], s: usize) -> Result<Vec<f64>> {
    if p > MAX_DEGREE {
        return Err(NukesError::DegreeUnsupported { degree: p, max: MAX_DEGREE });
    }
    let n_basis = basis_count(p, knots);
    if s < p || s >= n_basis || knots[s + 1] <= knots[s] {
        return Err(NukesError::IndexOutOfRange { index: s, count: n_basis });
    }
    let t = knots;
    let h = t[s + 1] - t[s];
    // polys[j] is N_{s-k+j, k} in ascending powers of u
    let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
    for k in 1..=p {
        let mut next = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let i = s + j - k;
            let mut poly = vec![0.0; k + 1];
            // left term uses N_{i,k-1} = polys[j - 1] when i >= s-k+1
            if j >= 1 {
                let d = t[i + k] - t[i];
                if d != 0.0 {
                    let (a, b) = ((t[s] - t[i]) / d, h / d);
                    mul_linear_acc(&mut poly, &polys[j - 1], a, b);
                }
            }
            // right term uses N_{i+1,k-1} = polys[j] when i+1 <= s
            if j < k {
                let d = t[i + k + 1] - t[i + 1];
                if d != 0.0 {
                    let (a, b) = ((t[i + k + 1] - t[s]) / d, -h / d);
                    mul_linear_acc(&mut poly, &polys[j], a, b);
                }
            }
            next.push(poly);
        }
        polys = next;
    }
    let mut m = vec![0.0; (p + 1) * (p + 1)];
    for (j, poly) in polys.iter().enumerate() {
        for (pow, &c) in poly.iter().enumerate() {
            m[(p - pow) * (p + 1) + j] = c;
        }
    }
    Ok(m)
}

/// `acc += (a + b u) * poly`, all in ascending powers.
fn mul_linear_acc(acc: &mut [f64], poly: &[f64], a: f64, b: f64) {
    for (k, &c) in poly.iter().enumerate() {
        acc[k] += a * c;
        acc[k + 1] += b * c;
    }
}

/// Evaluates `[u^p, ..., 1] * M` for a span matrix.
pub fn eval_span_row(p: usize, m: &[f64], u: f64) -> Vec<f64> {
    let mut out = vec![0.0; p + 1];
    eval_span_row_into(p, m, u, &mut out);
    out
}

pub(crate) fn eval_span_row_into(p: usize, m: &[f64], u: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    // Horner over rows: row 0 is the highest power
    for r in 0..=p {
        let row = &m[r * (p + 1)..(r + 1) * (p + 1)];
        for (o, &c) in out.iter_mut().zip(row) {
            *o = *o * u + c;
        }
    }
}

/// Active basis values of one evaluation point.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisRow {
    /// Knot span; `values[j]` is `N_{span-p+j}`.
    pub span: usize,
    pub values: Vec<f64>,
}

impl BasisRow {
    pub fn first_index(&self) -> usize {
        self.span + 1 - self.values.len()
    }

    /// Expands to all `n_basis` functions.
    pub fn dense(&self, n_basis: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_basis];
        let first = self.first_index();
        out[first..first + self.values.len()].copy_from_slice(&self.values);
        out
    }
}

/// Matrix-form basis evaluation for a batch of points.
pub fn bspline_basis_matrix(p: usize, xs: &[f64], knots: &[f64]) -> Result<Vec<BasisRow>> {
    if p > MAX_DEGREE {
        return Err(NukesError::DegreeUnsupported { degree: p, max: MAX_DEGREE });
    }
    validate_knots(p, knots)?;
    let mut cache: Vec<Option<Vec<f64>>> = vec![None; knots.len()];
    xs.iter()
        .map(|&x| {
            let s = find_span(p, x, knots)?;
            if cache[s].is_none() {
                cache[s] = Some(span_matrix(p, knots, s)?);
            }
            let m = cache[s].as_ref().expect("filled above");
            let u = (x - knots[s]) / (knots[s + 1] - knots[s]);
            Ok(BasisRow {
                span: s,
                values: eval_span_row(p, m, u),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degree_zero_indicator() {
        let k = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(bspline_basis_recursive(0, 0, 0.5, &k).unwrap(), 1.0);
        assert_eq!(bspline_basis_recursive(1, 0, 0.5, &k).unwrap(), 0.0);
    }

    #[test]
    fn degree_one_by_hand() {
        let k = [0.0, 1.0, 2.0];
        assert_eq!(bspline_basis_recursive(0, 1, 0.5, &k).unwrap(), 0.5);
    }

    #[test]
    fn index_out_of_range() {
        let k = [0.0, 1.0, 2.0];
        assert!(matches!(
            bspline_basis_recursive(1, 1, 0.5, &k),
            Err(NukesError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn uniform_quadratic_partition_of_unity() {
        let k: Vec<f64> = (0..10).map(f64::from).collect();
        for step in 0..=100 {
            let x = 2.0 + 5.0 * step as f64 / 100.0 * 0.999;
            let s: f64 = (0..7).map(|i| bspline_basis_recursive(i, 2, x, &k).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_matches_recursive_cubic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k: Vec<f64> = (0..12).map(|i| i as f64 * 0.5 - 1.0).collect();
        let p = 3;
        let n = basis_count(p, &k);
        let (lo, hi) = (k[p], k[n]);
        let xs: Vec<f64> = (0..100).map(|_| rng.random_range(lo..hi)).collect();
        for (x, row) in xs.iter().zip(bspline_basis_matrix(p, &xs, &k).unwrap()) {
            let dense = row.dense(n);
            for (i, v) in dense.iter().enumerate() {
                let r = bspline_basis_recursive(i, p, *x, &k).unwrap();
                assert!((v - r).abs() < 1e-9);
            }
            assert!((dense.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn degree_zero_matrix_is_one_hot() {
        let k = [0.0, 1.0, 2.5, 3.0];
        let rows = bspline_basis_matrix(0, &[0.2, 1.7, 2.9], &k).unwrap();
        assert_eq!(rows[0].dense(3), vec![1.0, 0.0, 0.0]);
        assert_eq!(rows[1].dense(3), vec![0.0, 1.0, 0.0]);
        assert_eq!(rows[2].dense(3), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn right_end_and_domain() {
        let k = [0.0, 0.0, 0.0, 1.0, 2.0, 2.0, 2.0];
        assert_eq!(find_span(2, 2.0, &k).unwrap(), 3);
        let row = &bspline_basis_matrix(2, &[2.0], &k).unwrap()[0];
        assert_eq!(row.dense(4), vec![0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(find_span(2, 2.1, &k), Err(NukesError::OutOfDomain { .. })));
        assert!(matches!(find_span(2, f64::NAN, &k), Err(NukesError::OutOfDomain { .. })));
    }

    #[test]
    fn degree_above_max_rejected() {
        let k: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(matches!(
            bspline_basis_matrix(6, &[9.5], &k),
            Err(NukesError::DegreeUnsupported { degree: 6, .. })
        ));
    }
}
