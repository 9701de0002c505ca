use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nukes_core::gradcore::{adam_step, AdamConfig, AdamState, Binder, ParamSet, Tape, Tensor};
use nukes_core::losses::non_degraded_loss;
use nukes_core::nukesformer::{count_params, cycle_pass, GeneratorConfig, ModelConfig, NukesFormer, Role};

fn small() -> ModelConfig {
    ModelConfig {
        bands: 6,
        generator: GeneratorConfig { stage_blocks: vec![1, 1, 1], base_channels: 4, ..GeneratorConfig::default() },
        projector_dim: 8,
        ..ModelConfig::default()
    }
}

fn rand_tensor(shape: [usize; 3], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(0.0..1.0))
}

fn cycle_values(model: &NukesFormer, ps: &ParamSet, x: &Tensor, y: &Tensor) -> [Tensor; 4] {
    let tape = Tape::new();
    let b = Binder::new(&tape, ps);
    let o = cycle_pass(model, &b, tape.constant(x.clone()), tape.constant(y.clone())).unwrap();
    [o.y_fake, o.x_rec, o.x_fake, o.y_rec].map(|g| (*g.image.value()).clone())
}

#[test]
fn cycle_uses_one_parameter_set_per_generator() {
    let model = NukesFormer::new(small()).unwrap();
    let ps = model.init_params(Role::Train, 3).unwrap();
    let x = rand_tensor([6, 8, 8], 1);
    let y = rand_tensor([3, 8, 8], 2);
    let before = cycle_values(&model, &ps, &x, &y);

    // changing the HSI-to-RGB generator moves both outputs it produces
    // and the reconstruction that consumes one of them, but not G_rh(y)
    let mut bumped = ps.clone();
    bumped.get_mut("g_hr.out_map.b").unwrap().data_mut()[0] += 0.5;
    let after = cycle_values(&model, &bumped, &x, &y);
    assert!(after[0].max_abs_diff(&before[0]) > 1e-3, "y_fake");
    assert!(after[1].max_abs_diff(&before[1]) > 1e-9, "x_rec");
    assert_eq!(after[2].max_abs_diff(&before[2]), 0.0, "x_fake");
    assert!(after[3].max_abs_diff(&before[3]) > 1e-3, "y_rec");
}

#[test]
fn non_degraded_term_alone_pulls_bypass_toward_identity() {
    let model = NukesFormer::new(small()).unwrap();
    let mut ps = model.init_params(Role::Train, 5).unwrap();
    let x = rand_tensor([6, 8, 8], 3);
    let y = rand_tensor([3, 8, 8], 4);
    let mut opt = AdamState::new(AdamConfig { lr_init: 1e-2, horizon: 40, ..AdamConfig::default() });
    let mut losses = Vec::new();
    for _ in 0..40 {
        let tape = Tape::new();
        let b = Binder::new(&tape, &ps);
        let l = non_degraded_loss(&model, &b, tape.constant(x.clone()), tape.constant(y.clone())).unwrap();
        losses.push(l.value().data()[0]);
        let g = tape.backward(l).unwrap();
        let grads = b.grads(&g);
        assert!(grads.keys().all(|k| k.starts_with("g_") || k.starts_with("nde_")));
        adam_step(&mut ps, &grads, &mut opt).unwrap();
    }
    assert!(losses[39] < 0.5 * losses[0], "{} -> {}", losses[0], losses[39]);
}

#[test]
fn doubling_base_channels_grows_both_counts() {
    let a = NukesFormer::new(small()).unwrap();
    let mut cfg = small();
    cfg.generator.base_channels *= 2;
    let b = NukesFormer::new(cfg).unwrap();
    for role in [Role::Train, Role::Infer] {
        assert!(count_params(&b, role) > count_params(&a, role));
    }
    assert!(count_params(&a, Role::Infer) * 2 < count_params(&a, Role::Train));
}
