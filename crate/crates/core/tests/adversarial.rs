use djmix_core::curves::{BandLayout, Interval};
use djmix_core::disc::{sigmoid, DiscriminatorParams, FeatureSpec};
use djmix_core::gan::{discriminator_gradient, FakeItem, GanConfig, GanPair, GanState};
use djmix_core::mixer::{linear_crossfade_raw, PairSpectra, ParamLayout, RawParams};
use djmix_core::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn layout() -> BandLayout {
    BandLayout::from_hz(4, &[20.0, 300.0, 5000.0, 20000.0], 44100.0).unwrap()
}

fn pairs(seed: u64, n: usize) -> (Vec<GanPair>, FeatureSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = layout();
    let spec = FeatureSpec::from_layout(&layout, 8);
    let (t, f) = (64, 513);
    let out = (0..n)
        .map(|_| {
            let a = Grid::from_fn(t, f, |_, _| rng.gen_range(0.0..3.0));
            let b = Grid::from_fn(t, f, |_, _| rng.gen_range(0.0..3.0));
            GanPair::new(PairSpectra::new(a, b).unwrap(), Interval::new(0.25, 0.75), &spec).unwrap()
        })
        .collect();
    (out, spec)
}

fn random_raw(rng: &mut ChaCha8Rng, pl: ParamLayout) -> RawParams {
    RawParams::new(pl, (0..pl.len()).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

#[test]
fn bce_gradient_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = DiscriminatorParams { weights: (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(), bias: 0.3 };
    let f: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..2.0)).collect();
    for y in [0.0, 1.0] {
        let z: f64 = d.weights.iter().zip(&f).map(|(w, x)| w * x).sum::<f64>() + d.bias;
        let p = 1.0 / (1.0 + (-z).exp());
        let (gw, gb) = d.bce_gradient(&f, y).unwrap();
        assert!((gb - (p - y)).abs() < 1e-15);
        for (g, x) in gw.iter().zip(&f) {
            assert!((g - (p - y) * x).abs() < 1e-15);
        }
    }
}

#[test]
fn forward_matches_scalar_sigmoid_and_is_monotone_in_bias() {
    let mut d = DiscriminatorParams::zeros(3);
    assert_eq!(d.forward(&[1.0, 2.0, 3.0]).unwrap(), 0.5);
    let mut last = 0.0;
    for b in [-30.0, -2.0, 0.0, 2.0, 30.0, 700.0] {
        d.bias = b;
        let p = d.forward(&[0.0; 3]).unwrap();
        assert!((p - 1.0 / (1.0 + f64::exp(-b))).abs() <= 1e-15);
        assert!(p >= last);
        last = p;
    }
    assert_eq!(sigmoid(-800.0), 0.0);
    assert!(d.forward(&[0.0; 2]).is_err());
}

#[test]
fn matched_batches_give_vanishing_discriminator_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let feats: Vec<Vec<f64>> = (0..4000).map(|_| (0..8).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
    let (real, fake) = feats.split_at(2000);
    let real: Vec<&[f64]> = real.iter().map(Vec::as_slice).collect();
    let fake: Vec<&[f64]> = fake.iter().map(Vec::as_slice).collect();
    let (gw, gb) = discriminator_gradient(&DiscriminatorParams::zeros(8), &real, &fake).unwrap();
    assert!(gb.abs() < 1e-12);
    assert!(gw.iter().all(|g| g.abs() < 0.02), "{gw:?}");
    // same samples on both sides cancel exactly
    let (gw, gb) = discriminator_gradient(&DiscriminatorParams::zeros(8), &real, &real).unwrap();
    assert!(gb.abs() < 1e-12 && gw.iter().all(|g| g.abs() < 1e-12));
}

#[test]
fn separating_discriminator_still_pushes_generator() {
    let (pairs, spec) = pairs(4, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pl = ParamLayout::new(4, false);
    let gens = vec![random_raw(&mut rng, pl), random_raw(&mut rng, pl)];
    let mut state =
        GanState::new(gens, DiscriminatorParams::zeros(spec.len()), layout(), GanConfig::default()).unwrap();
    let fake: Vec<FakeItem> = pairs.iter().enumerate().map(|(i, p)| FakeItem { pair: p, generator: i }).collect();
    // a discriminator that scores these fakes near zero
    let f0 = state.fake_features(&fake[0]).unwrap();
    state.disc.weights = f0.iter().map(|_| -1.0).collect();
    state.disc.bias = f0.iter().sum::<f64>() - 6.0;
    let p = state.disc.forward(&f0).unwrap();
    assert!(p < 0.01, "{p}");
    let (_, grads) = state.generator_gradients(&fake).unwrap();
    let norm: f64 = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm > 0.0);
}

#[test]
fn zero_learning_rate_step_is_a_no_op() {
    let (pairs, spec) = pairs(5, 2);
    let pl = ParamLayout::new(4, true);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gens = vec![random_raw(&mut rng, pl)];
    let real_mix: Vec<Vec<f64>> = {
        let probe = GanState::new(
            vec![linear_crossfade_raw(pl)],
            DiscriminatorParams::zeros(spec.len()),
            layout(),
            GanConfig::default(),
        )
        .unwrap();
        vec![probe.fake_features(&FakeItem { pair: &pairs[1], generator: 0 }).unwrap()]
    };
    let real: Vec<&[f64]> = real_mix.iter().map(Vec::as_slice).collect();
    let config = GanConfig { g_lr: 0.0, d_lr: 0.0, ..GanConfig::default() };
    let mut state = GanState::new(gens.clone(), DiscriminatorParams::zeros(spec.len()), layout(), config).unwrap();
    let before = state.disc.clone();
    let m = state.step(&real, &[FakeItem { pair: &pairs[0], generator: 0 }]).unwrap();
    assert_eq!(state.generators, gens);
    assert_eq!(state.disc, before);
    assert_eq!(m.mean_d_fake, 0.5);
    assert!((m.d_loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    assert!(m.g_grad_norm.is_finite());
}

#[test]
fn steps_keep_generators_in_unit_box_and_are_deterministic() {
    let run = || {
        let (pairs, spec) = pairs(6, 4);
        let pl = ParamLayout::new(4, false);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gens = (0..2).map(|_| random_raw(&mut rng, pl)).collect();
        let config = GanConfig { g_lr: 0.2, d_lr: 0.2, ..GanConfig::default() };
        let mut state = GanState::new(gens, DiscriminatorParams::zeros(spec.len()), layout(), config).unwrap();
        let probe =
            GanState::new(vec![linear_crossfade_raw(pl)], DiscriminatorParams::zeros(spec.len()), layout(), config)
                .unwrap();
        let real_feats: Vec<Vec<f64>> =
            pairs[2..].iter().map(|p| probe.fake_features(&FakeItem { pair: p, generator: 0 }).unwrap()).collect();
        let real: Vec<&[f64]> = real_feats.iter().map(Vec::as_slice).collect();
        let fake = [FakeItem { pair: &pairs[0], generator: 0 }, FakeItem { pair: &pairs[1], generator: 1 }];
        let mut history = Vec::new();
        for _ in 0..25 {
            history.push(state.step(&real, &fake).unwrap());
            assert!(state.generators.iter().flat_map(|g| g.values()).all(|u| (0.0..=1.0).contains(u)));
        }
        (history, state.generators)
    };
    let (h1, g1) = run();
    let (h2, g2) = run();
    assert_eq!(h1, h2);
    assert_eq!(g1, g2);
}

#[test]
fn empty_batches_rejected() {
    let (pairs, spec) = pairs(7, 1);
    let pl = ParamLayout::new(4, false);
    let mut state = GanState::new(
        vec![RawParams::filled(pl, 0.5)],
        DiscriminatorParams::zeros(spec.len()),
        layout(),
        GanConfig::default(),
    )
    .unwrap();
    let f = vec![0.0; spec.len()];
    assert!(state.step(&[], &[FakeItem { pair: &pairs[0], generator: 0 }]).is_err());
    assert!(state.step(&[&f], &[]).is_err());
    assert!(GanState::new(vec![], DiscriminatorParams::zeros(1), layout(), GanConfig::default()).is_err());
}

#[test]
fn generator_gradient_matches_finite_differences_under_normalization() {
    use djmix_core::disc::FeatureNorm;
    let (ps, spec) = pairs(9, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pl = ParamLayout::new(4, false);
    let mut disc = DiscriminatorParams::zeros(spec.len());
    disc.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
    let norm = FeatureNorm {
        mean: (0..spec.len()).map(|_| rng.gen_range(0.0..1.0)).collect(),
        scale: (0..spec.len()).map(|_| rng.gen_range(0.1..2.0)).collect(),
    };
    let raw = RawParams::filled(pl, 0.4);
    let state =
        GanState::new(vec![raw.clone()], disc, layout(), GanConfig::default()).unwrap().with_norm(norm).unwrap();
    let item = [FakeItem { pair: &ps[0], generator: 0 }];
    let (_, grads) = state.generator_gradients(&item).unwrap();
    let objective = |values: &[f64]| {
        let mut s = state.clone();
        s.generators[0] = RawParams::new(pl, values.to_vec()).unwrap();
        s.generator_gradients(&item).unwrap().0
    };
    let h = 1e-6;
    let mut checked = 0;
    for i in 0..pl.len() {
        let mut up = raw.values().to_vec();
        let mut down = up.clone();
        up[i] += h;
        down[i] -= h;
        let numeric = (objective(&up) - objective(&down)) / (2.0 * h);
        let analytic = grads[0][i];
        if numeric.abs() > 1e-8 || analytic.abs() > 1e-8 {
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs());
            assert!(rel < 1e-4, "coordinate {i}: numeric {numeric} analytic {analytic}");
            checked += 1;
        }
    }
    assert!(checked > pl.len() / 2, "{checked}");
    // the folded discriminator scores raw features identically
    let f = state.fake_features(&item[0]).unwrap();
    let z = state.disc.logit(&state.norm.apply(&f).unwrap()).unwrap();
    assert!((state.raw_discriminator().logit(&f).unwrap() - z).abs() < 1e-9);
}
