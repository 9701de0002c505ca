use serde::{Deserialize, Serialize};

use super::basis::{basis_count, bspline_basis_matrix, validate_knots, MAX_DEGREE};
use super::{NukesError, Result};

/// A rational (weighted) B-spline curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineSpec {
    pub degree: usize,
    pub knots: Vec<f64>,
    pub control_points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SplineSpec {
    /// Unit weights, i.e. a plain B-spline curve.
    pub fn polynomial(degree: usize, knots: Vec<f64>, control_points: Vec<f64>) -> Result<Self> {
        let n = control_points.len();
        let s = Self {
            degree,
            knots,
            control_points,
            weights: vec![1.0; n],
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree > MAX_DEGREE {
            return Err(NukesError::DegreeUnsupported {
                degree: self.degree,
                max: MAX_DEGREE,
            });
        }
        validate_knots(self.degree, &self.knots)?;
        let n = basis_count(self.degree, &self.knots);
        if self.control_points.len() != n || self.weights.len() != n {
            return Err(NukesError::ShapeMismatch(format!(
                "{n} basis functions, {} control points, {} weights",
                self.control_points.len(),
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(NukesError::InvalidWeights);
        }
        Ok(())
    }

    pub fn n_basis(&self) -> usize {
        self.control_points.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.n_basis()])
    }
}

/// `sum N_i w_i P_i / sum N_i w_i`.
pub fn nuk_eval(spec: &SplineSpec, x: f64) -> Result<f64> {
    Ok(nuk_eval_batch(spec, &[x])?[0])
}

pub fn nuk_eval_batch(spec: &SplineSpec, xs: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    let rows = bspline_basis_matrix(spec.degree, xs, &spec.knots)?;
    rows.iter()
        .zip(xs)
        .map(|(row, &x)| {
            let first = row.first_index();
            let (mut num, mut den) = (0.0, 0.0);
            for (j, n) in row.values.iter().enumerate() {
                let w = spec.weights[first + j];
                num += n * w * spec.control_points[first + j];
                den += n * w;
            }
            if !(den > 0.0) {
                return Err(NukesError::ZeroDenominator { x });
            }
            Ok(num / den)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nukes::basis::bspline_basis_recursive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(rng: &mut ChaCha8Rng, p: usize, n: usize) -> SplineSpec {
        let mut knots: Vec<f64> = (0..n + p + 1).map(|_| rng.random_range(-2.0..2.0)).collect();
        knots.sort_by(f64::total_cmp);
        SplineSpec {
            degree: p,
            knots,
            control_points: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            weights: (0..n).map(|_| rng.random_range(0.2..3.0)).collect(),
        }
    }

    #[test]
    fn constant_control_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = random_spec(&mut rng, 3, 9);
        s.control_points = vec![0.7; 9];
        let (lo, hi) = s.domain();
        for k in 0..=20 {
            let x = lo + (hi - lo) * k as f64 / 20.0;
            assert!((nuk_eval(&s, x).unwrap() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_weights_reduce_to_bspline() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = random_spec(&mut rng, 2, 7);
        s.weights = vec![2.5; 7];
        let plain = SplineSpec::polynomial(2, s.knots.clone(), s.control_points.clone()).unwrap();
        let (lo, hi) = s.domain();
        for k in 0..20 {
            let x = lo + (hi - lo) * k as f64 / 20.0;
            assert!((nuk_eval(&s, x).unwrap() - nuk_eval(&plain, x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_rational_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_spec(&mut rng, 3, 10);
        let (lo, hi) = s.domain();
        for _ in 0..50 {
            let x = rng.random_range(lo..hi);
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..10 {
                let n = bspline_basis_recursive(i, 3, x, &s.knots).unwrap();
                num += n * s.weights[i] * s.control_points[i];
                den += n * s.weights[i];
            }
            assert!((nuk_eval(&s, x).unwrap() - num / den).abs() < 1e-10);
        }
    }

    #[test]
    fn weight_scaling_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_spec(&mut rng, 3, 8);
        let mut t = s.clone();
        t.weights.iter_mut().for_each(|w| *w *= 17.3);
        let (lo, hi) = s.domain();
        for k in 0..20 {
            let x = lo + (hi - lo) * k as f64 / 20.0;
            assert!((nuk_eval(&s, x).unwrap() - nuk_eval(&t, x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain() {
        let s = SplineSpec::polynomial(1, vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(nuk_eval(&s, 1.5), Err(NukesError::OutOfDomain { .. })));
        assert_eq!(nuk_eval(&s, 0.25).unwrap(), 0.25);
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let mut s = SplineSpec::polynomial(1, vec![0.0, 0.0, 1.0, 1.0], vec![0.0, 1.0]).unwrap();
        s.weights[0] = 0.0;
        assert!(nuk_eval(&s, 0.5).is_err());
    }
}
