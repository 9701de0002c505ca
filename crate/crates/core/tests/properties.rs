use nalgebra::DMatrix;
use proptest::prelude::*;

use nukes_core::gradcore::{Tape, Tensor};
use nukes_core::hsicube::{load_cube, null_component, save_cube, HsiCube, SrfOperator};
use nukes_core::losses::{spectral_contrastive, total_loss, LossTerms, LossWeights};
use nukes_core::metrics::{mrae, psnr, rmse, sam, ssim, SamMode};
use nukes_core::nukes::{
    bspline_basis_matrix, bspline_basis_recursive, cumulative_positions, ncpg_knots, NcpgConfig,
};

fn cube_strategy(max_side: usize, max_bands: usize) -> impl Strategy<Value = HsiCube> {
    (1..=max_side, 1..=max_side, 1..=max_bands).prop_flat_map(|(w, h, c)| {
        prop::collection::vec(-4.0f32..4.0, w * h * c)
            .prop_map(move |v| HsiCube::new(w, h, c, v.into_iter().map(f64::from).collect()).unwrap())
    })
}

/// Two positive cubes of one shape, values in [0.05, 1.05).
fn cube_pair() -> impl Strategy<Value = (HsiCube, HsiCube)> {
    (2usize..5, 2usize..5, 2usize..6).prop_flat_map(|(w, h, c)| {
        let n = w * h * c;
        (prop::collection::vec(0.05f64..1.05, n), prop::collection::vec(0.05f64..1.05, n)).prop_map(
            move |(a, b)| (HsiCube::new(w, h, c, a).unwrap(), HsiCube::new(w, h, c, b).unwrap()),
        )
    })
}

fn scaled(x: &HsiCube, k: f64) -> HsiCube {
    HsiCube::new(x.width(), x.height(), x.bands(), x.data().iter().map(|v| v * k).collect()).unwrap()
}

/// Clamped knot vector on [0, 1] with `inner` sorted interior knots.
fn knot_vector(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..0.99, 0..6).prop_map(move |mut inner| {
        inner.sort_by(f64::total_cmp);
        let mut k = vec![0.0; p + 1];
        k.extend(inner);
        k.extend(std::iter::repeat_n(1.0, p + 1));
        k
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cube_file_round_trip_is_exact(cube in cube_strategy(5, 6)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.hsc");
        save_cube(&cube, &path).unwrap();
        let back = load_cube(&path).unwrap();
        prop_assert_eq!(back, cube);
    }

    #[test]
    fn srf_projectors_are_complementary(
        c in 4usize..12,
        seed in prop::collection::vec(0.01f64..1.0, 36),
    ) {
        let d = DMatrix::from_fn(3, c, |r, j| seed[(r * 11 + j * 3) % 36] + 0.1 * (r == j % 3) as u8 as f64);
        let Ok(srf) = SrfOperator::from_matrix(d, 0.0) else { return Ok(()) };
        let pr = srf.range_proj();
        let pn = srf.null_proj();
        let id = DMatrix::<f64>::identity(c, c);
        prop_assert!((pr + pn - &id).amax() < 1e-10);
        prop_assert!((pr * pr - pr).amax() < 1e-8);
        prop_assert!((srf.d() * pn).amax() < 1e-8);
    }

    #[test]
    fn null_component_is_invisible(cube in cube_strategy(3, 1), bands in 4usize..9) {
        // reuse the generated values, tiled over `bands`
        let v: Vec<f64> = cube.data().iter().cycle().take(cube.pixels() * bands).enumerate()
            .map(|(i, x)| x + (i % 7) as f64 * 0.1).collect();
        let x = HsiCube::new(cube.width(), cube.height(), bands, v).unwrap();
        let srf = nukes_core::hsicube::default_srf(bands).unwrap();
        let n = null_component(&x, &srf).unwrap();
        for p in 0..n.pixels() {
            let s = DMatrix::from_vec(bands, 1, n.spectrum(p));
            prop_assert!((srf.d() * s).amax() < 1e-10);
        }
    }

    #[test]
    fn basis_forms_agree_and_partition_unity(
        (p, k) in (0usize..=5).prop_flat_map(|p| (Just(p), knot_vector(p))),
        xs in prop::collection::vec(0.0f64..1.0, 10),
    ) {
        let n = k.len() - p - 1;
        let rows = bspline_basis_matrix(p, &xs, &k).unwrap();
        for (x, row) in xs.iter().zip(&rows) {
            let dense = row.dense(n);
            prop_assert!((dense.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (i, v) in dense.iter().enumerate() {
                let r = bspline_basis_recursive(i, p, *x, &k).unwrap();
                prop_assert!((v - r).abs() < 1e-9, "i {} x {} matrix {} recursive {}", i, x, v, r);
            }
        }
    }

    #[test]
    fn raw_increment_moves_only_later_positions(
        raw in prop::collection::vec(-3.0f64..3.0, 2..10),
        j in 0usize..10,
        delta in 0.1f64..2.0,
    ) {
        let j = j % raw.len();
        let before = cumulative_positions(&raw);
        let mut bumped = raw.clone();
        bumped[j] += delta;
        let after = cumulative_positions(&bumped);
        for i in 0..=j {
            prop_assert_eq!(before[i], after[i]);
        }
        for i in j + 1..before.len() {
            prop_assert!(after[i] > before[i]);
        }
    }

    #[test]
    fn ncpg_knots_are_clamped_and_sorted(raw in prop::collection::vec(-6.0f64..6.0, 9)) {
        let cfg = NcpgConfig::default();
        let k = ncpg_knots(&raw, &cfg).unwrap();
        prop_assert_eq!(k.len(), cfg.n_basis() + cfg.degree + 1);
        prop_assert!(k.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(k[0], -cfg.radius);
        prop_assert_eq!(k[k.len() - 1], cfg.radius);
    }

    #[test]
    fn metrics_symmetry_and_scaling((x, y) in cube_pair(), k in 0.1f64..10.0) {
        prop_assume!(x != y);
        prop_assert!((rmse(&x, &y).unwrap() - rmse(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!((rmse(&scaled(&x, k), &scaled(&y, k)).unwrap() - k * rmse(&x, &y).unwrap()).abs() < 1e-9);
        prop_assert!((mrae(&scaled(&x, k), &scaled(&y, k)).unwrap() - mrae(&x, &y).unwrap()).abs() < 1e-9);
        prop_assert!((psnr(&scaled(&x, k), &scaled(&y, k)).unwrap() - psnr(&x, &y).unwrap()).abs() < 1e-6);
        for mode in [SamMode::Band, SamMode::Pixel] {
            let s = sam(&x, &y, mode).unwrap();
            prop_assert!((s - sam(&y, &x, mode).unwrap()).abs() < 1e-9);
            prop_assert!((s - sam(&scaled(&x, k), &y, mode).unwrap()).abs() < 1e-6);
        }
        prop_assert!((ssim(&x, &y).unwrap() - ssim(&y, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn total_loss_is_linear_in_weights(
        terms in prop::collection::vec(0.0f64..5.0, 5),
        w in prop::collection::vec(0.0f64..2.0, 5),
        k in 0.1f64..4.0,
    ) {
        let eval = |w: &[f64]| {
            let tape = Tape::new();
            let v: Vec<_> = terms.iter().map(|t| tape.constant(Tensor::scalar(*t))).collect();
            let t = LossTerms { cycle: v[0], non_degraded: v[1], adversarial: v[2], spectral: v[3], geometric: v[4] };
            let lw = LossWeights { cycle: w[0], non_degraded: w[1], adversarial: w[2], spectral: w[3], geometric: w[4] };
            total_loss(&t, &lw).unwrap().value().data()[0]
        };
        let base = eval(&w);
        let expected: f64 = terms.iter().zip(&w).map(|(t, w)| t * w).sum();
        prop_assert!((base - expected).abs() < 1e-12);
        let kw: Vec<f64> = w.iter().map(|v| v * k).collect();
        prop_assert!((eval(&kw) - k * base).abs() < 1e-9);
    }

    #[test]
    fn spectral_contrastive_ignores_vector_scale(
        vals in prop::collection::vec(0.1f64..1.0, 12),
        scale in prop::collection::vec(0.2f64..5.0, 4),
    ) {
        let eval = |s: &[f64]| {
            let tape = Tape::new();
            let v: Vec<_> = (0..4)
                .map(|i| tape.constant(Tensor::new([3], vals[3 * i..3 * i + 3].iter().map(|x| x * s[i]).collect()).unwrap()))
                .collect();
            spectral_contrastive(v[0], v[1], &v[2..], 0.5).unwrap().value().data()[0]
        };
        prop_assert!((eval(&[1.0; 4]) - eval(&scale)).abs() < 1e-9);
    }
}
