//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::{Duration, Instant};

use djmix::cli::{CommonArgs, Settings};
use djmix::learn::{features_under, gan_pair, initial_generators, train_gan, trajectory_rmse, TrainConfig};
use djmix::prepare::{analyze_pair, crop_to_region, prepare_pair};
use djmix::render::{masks_for, render, render_with_masks, RenderConfig};
use djmix::stft::{snr_db, SpectroConfig, Stft, WindowKind};
use djmix::strategies::{linear_mix, linear_params};
use djmix::synth::{random_track, synthetic_pair, SyntheticPairSpec};
use djmix_core::cueing::{compatible, compute_cues, BeatGrid, Key, Mode};
use djmix_core::curves::{band_curves, default_edges_hz, fade_in, fade_out, Axis, BandLayout, FadeParams, Interval};
use djmix_core::disc::FeatureSpec;
use djmix_core::fit::{fit_params, OptConfig};
use djmix_core::gan::GanConfig;
use djmix_core::grad::{finite_diff_check, LossSpec, MixProblem};
use djmix_core::mixer::{
    build_masks, constrain, linear_crossfade_raw, mix_magnitude, MixerParams, PairSpectra, ParamLayout, RawParams,
    TrackParams,
};
use djmix_core::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SR: u32 = 44_100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn paper_layout() -> BandLayout {
    BandLayout::from_hz(4, &[20.0, 300.0, 5000.0, 20000.0], SR as f64).unwrap()
}

fn random_ramp(rng: &mut ChaCha8Rng, bound: Interval) -> FadeParams {
    let s = bound.lo + rng.gen::<f64>() * bound.width();
    let min_slope = 1.0 / (bound.hi - s + 1e-6);
    FadeParams::new(s, min_slope * (1.0 + 49.0 * rng.gen::<f64>()))
}

fn fade_complement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let axis = Axis::linear(1024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c_in = rng.gen_range(0.0..0.8);
        let region = Interval::new(c_in, rng.gen_range(c_in + 0.01..1.0));
        let p = random_ramp(&mut rng, region);
        let a = fade_in(&axis, p, region).unwrap();
        let b = fade_out(&axis, p, region).unwrap();
        worst = a.iter().zip(&b).map(|(x, y)| (x + y - 1.0).abs()).fold(worst, f64::max);
    }
    outcome(worst <= 1e-12, format!("max |in + out - 1| = {worst:.2e}"))
}

fn partition_of_unity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let axis = Axis::linear(1025);
    let (mut dev, mut low): (f64, f64) = (0.0, 0.0);
    for k in [2, 3, 4, 6] {
        let layout = BandLayout::from_hz(k, &default_edges_hz(k), SR as f64).unwrap();
        for _ in 0..1000 {
            let filters: Vec<FadeParams> = layout.boundaries().iter().map(|&b| random_ramp(&mut rng, b)).collect();
            let bands = band_curves(&axis, &layout, &filters).unwrap();
            for f in 0..axis.len() {
                dev = dev.max((bands.iter().map(|b| b[f]).sum::<f64>() - 1.0).abs());
                low = low.min(bands.iter().map(|b| b[f]).fold(f64::INFINITY, f64::min));
            }
        }
    }
    outcome(dev <= 1e-12 && low >= -1e-12, format!("max |sum - 1| = {dev:.2e}, min band = {low:.2e}"))
}

fn dense_mask(track: &TrackParams, outgoing: bool, frames: usize, bins: usize) -> Grid {
    let k = track.fades.len();
    let clip = |v: f64, p: &FadeParams| ((v - p.start).clamp(0.0, 1.0) * p.slope).clamp(0.0, 1.0);
    let low = |b: usize, v: f64| 1.0 - clip(v, &track.filters[b]);
    Grid::from_fn(frames, bins, |t, f| {
        let vt = t as f64 / (frames - 1) as f64;
        let vf = f as f64 / (bins - 1) as f64;
        (0..k)
            .map(|i| {
                let ramp = clip(vt, &track.fades[i]);
                let g = if outgoing { 1.0 - ramp } else { ramp };
                let h = match i {
                    0 => low(0, vf),
                    _ if i == k - 1 => 1.0 - low(k - 2, vf),
                    _ => low(i, vf) - low(i - 1, vf),
                };
                g * h
            })
            .sum()
    })
}

fn mask_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layout = paper_layout();
    let pl = ParamLayout::new(4, false);
    let mut mismatches = 0;
    for _ in 0..100 {
        let c_in = rng.gen_range(0.0..0.5);
        let region = Interval::new(c_in, c_in + rng.gen_range(0.1..0.5));
        let raw = RawParams::new(pl, (0..pl.len()).map(|_| rng.gen()).collect()).unwrap();
        let params = constrain(&raw, region, &layout).unwrap();
        let (m1, m2) = build_masks(&params, 16, 9, &layout).unwrap();
        if m1 != dense_mask(&params.track1, true, 16, 9) || m2 != dense_mask(&params.track2, false, 16, 9) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches}/100 draws differ from the loop oracle"))
}

fn stft_round_trip() -> Outcome {
    let x = random_track(4, 60.0).unwrap().channel(0).to_vec();
    let cfg = SpectroConfig::default();
    let plan = Stft::new(cfg).unwrap();
    let y = plan.synthesize_len(&plan.analyze(&x).unwrap(), x.len()).unwrap();
    // interior: skip the first and last frame, where the window sum tapers
    let frames = cfg.frame_count(x.len()).unwrap();
    let end = (frames - 1) * cfg.hop;
    let snr = snr_db(&x[cfg.fft_size..end], &y[cfg.fft_size..end]);
    outcome(snr >= 50.0 && cfg.window == WindowKind::Hamming, format!("interior SNR {snr:.1} dB on 60 s"))
}

fn eight_bar_pair(seed: u64) -> djmix::prepare::PreparedPair {
    let bars = 40;
    let g = BeatGrid::regular(0.0, 120.0, 4, bars, None).unwrap();
    let cues = compute_cues(&g, &g, 8).unwrap();
    let len = bars as f64 * 2.0;
    prepare_pair(&random_track(seed, len).unwrap(), &random_track(seed + 1, len).unwrap(), &cues, 60.0).unwrap()
}

fn identity_render() -> Outcome {
    let pair = eight_bar_pair(5);
    let layout = paper_layout();
    let cfg = RenderConfig::default();
    let hold = TrackParams {
        fades: vec![FadeParams::new(1.0, 1e9); 4],
        filters: layout.boundaries().iter().map(|b| FadeParams::new(b.lo, 1.0 / b.width())).collect(),
    };
    let params = MixerParams { track1: hold.clone(), track2: hold };
    let (m1, m2) = masks_for(&pair, &params, &layout, &cfg.stft).unwrap();
    let exact = m1.data().iter().all(|&v| (v - 1.0).abs() < 1e-12) && m2.data().iter().all(|&v| v == 0.0);
    let y = render_with_masks(&pair, &m1, &m2, &cfg).unwrap();
    let n = cfg.stft.fft_size;
    let x1 = pair.x1.channel(0);
    let id_snr = snr_db(&x1[n..x1.len() - n], &y[0][n..x1.len() - n]);

    let lin = linear_mix(&pair).unwrap();
    let k1 = render(&pair, &linear_params(pair.region()), &BandLayout::single(), &cfg).unwrap();
    let lin_snr = snr_db(&lin.clip.channel(0)[n..x1.len() - n], &k1.clip.channel(0)[n..x1.len() - n]);
    outcome(
        exact && id_snr >= 50.0 && lin_snr >= 40.0,
        format!("identity {id_snr:.1} dB, linear vs k=1 masks {lin_snr:.1} dB"),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (t, f) = (64, 129);
    let grid = |rng: &mut ChaCha8Rng| Grid::from_fn(t, f, |_, _| rng.gen_range(0.0..2.0));
    let pair = PairSpectra::new(grid(&mut rng), grid(&mut rng)).unwrap();
    let loss = LossSpec::log_mag(grid(&mut rng));
    let layout = paper_layout();
    let problem = MixProblem::new(&pair, Interval::new(0.25, 0.75), &layout, &loss).unwrap();
    let pl = ParamLayout::new(4, false);
    let raw = RawParams::new(pl, (0..pl.len()).map(|_| rng.gen()).collect()).unwrap();
    let r = finite_diff_check(&problem, &raw, 1e-6).unwrap();
    let frac = r.pass_fraction(1e-3);
    outcome(
        frac >= 0.99 && r.max_rel_error <= 1e-5,
        format!(
            "{} checked, {} kink-adjacent, {:.1}% within 1e-3, max interior error {:.1e}",
            r.checked().count(),
            r.flagged_count(),
            100.0 * frac,
            r.max_rel_error
        ),
    )
}

fn inverse_rendering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pair = eight_bar_pair(7);
    let analysis = analyze_pair(&pair, &SpectroConfig::default()).unwrap();
    // masks are constant outside the region, so only its frames carry gradient
    let spectra = crop_to_region(&analysis.spectra, analysis.region, 0.0).unwrap();
    let layout = paper_layout();
    let pl = ParamLayout::new(4, false);
    let truth = RawParams::new(pl, (0..pl.len()).map(|_| rng.gen_range(0.1..0.9)).collect()).unwrap();
    let init = RawParams::new(pl, (0..pl.len()).map(|_| rng.gen()).collect()).unwrap();
    let target = mix_magnitude(&constrain(&truth, analysis.region, &layout).unwrap(), &spectra, &layout).unwrap();
    let loss = LossSpec::log_mag(target);
    let problem = MixProblem::new(&spectra, analysis.region, &layout, &loss).unwrap();
    let opt = OptConfig { steps: 200, learning_rate: 1e-2, seed: 7, ..OptConfig::default() };
    let out = fit_params(&problem, init, &opt).unwrap();
    let (first, last) = (out.history[0], *out.history.last().unwrap());
    let ratio = last / first;
    outcome(
        ratio <= 0.05,
        format!("loss {first:.3e} -> {last:.3e} ({:.2}% of initial) on {} frames", 100.0 * ratio, spectra.time.len()),
    )
}

/// Corpus used for the adversarial check: aligned synthetic pairs, with the
/// "real" exemplars being linear crossfades of a disjoint set of pairs.
struct GanSetup {
    spec: SyntheticPairSpec,
    train_pairs: u64,
    real_pairs: u64,
    cfg: TrainConfig,
}

impl GanSetup {
    fn new(seed: u64) -> Self {
        GanSetup {
            spec: SyntheticPairSpec { spread_db: 3.0, ..SyntheticPairSpec::default() },
            train_pairs: 8,
            real_pairs: 32,
            cfg: TrainConfig {
                steps: 500,
                batch_size: 4,
                seed,
                shared: true,
                gan: GanConfig { g_lr: 2e-3, d_lr: 1e-3, ..GanConfig::default() },
                param_layout: ParamLayout::new(4, false),
                normalize: false,
                d_warmup: 200,
            },
        }
    }

    /// `(rmse before, rmse after, mean D(fake) first 50, mean D(fake) last 50)`.
    fn run(&self) -> (f64, f64, f64, f64) {
        let stft = SpectroConfig::default();
        let layout = paper_layout();
        let spec = FeatureSpec::from_layout(&layout, 8);
        let seed = self.cfg.seed;
        let pairs = |offset: u64, n: u64| -> Vec<_> {
            (0..n)
                .map(|i| {
                    gan_pair(&synthetic_pair(seed * 1000 + offset + i, &self.spec).unwrap(), &stft, &spec).unwrap()
                })
                .collect()
        };
        let train = pairs(0, self.train_pairs);
        let held = pairs(500, self.real_pairs);
        let oracle = linear_crossfade_raw(self.cfg.param_layout);
        let real: Vec<Vec<f64>> = held.iter().map(|p| features_under(p, &oracle, &layout).unwrap()).collect();
        let init = initial_generators(train.len(), &self.cfg);
        let before = trajectory_rmse(&train, &init, &oracle, &layout).unwrap();
        let out = train_gan(&train, &real, &layout, &self.cfg, init).unwrap();
        let after = trajectory_rmse(&train, &out.generators, &oracle, &layout).unwrap();
        let mean =
            |xs: &[djmix_core::gan::StepMetrics]| xs.iter().map(|m| m.mean_d_fake).sum::<f64>() / xs.len() as f64;
        let h = &out.history;
        (before, after, mean(&h[..50]), mean(&h[h.len() - 50..]))
    }
}

fn adversarial_dynamics() -> Outcome {
    let mut improvements = Vec::new();
    let mut dynamics = None;
    for seed in 3..8 {
        let (before, after, first, last) = GanSetup::new(seed).run();
        improvements.push(1.0 - after / before);
        if seed == 3 {
            dynamics = Some((first, last));
        }
    }
    let (first, last) = dynamics.unwrap();
    let mut sorted = improvements.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let listed: Vec<String> = improvements.iter().map(|v| format!("{:.0}%", 100.0 * v)).collect();
    outcome(
        last > first && median >= 0.30,
        format!(
            "seed 3 mean D(fake) {first:.3} -> {last:.3}; RMSE reduction median {:.0}% ({})",
            100.0 * median,
            listed.join(", ")
        ),
    )
}

fn configuration() -> Outcome {
    let s = Settings::resolve(&CommonArgs::default()).unwrap();
    let tied = Settings::resolve(&CommonArgs { tie_last_fade: true, ..CommonArgs::default() }).unwrap();
    let ok = s.k == 4
        && s.band_edges_hz == [20.0, 300.0, 5000.0, 20000.0]
        && s.stft.fft_size == 2048
        && s.stft.hop == 512
        && s.stft.window == WindowKind::Hamming
        && s.mel.n_mels == 128
        && s.window_sec == 60.0
        && tied.param_layout().len() == 24;
    outcome(
        ok,
        format!(
            "k={} edges={:?} fft={} hop={} window={} mels={} window={} s, tied params={} (untied {})",
            s.k,
            s.band_edges_hz,
            s.stft.fft_size,
            s.stft.hop,
            s.stft.window.name(),
            s.mel.n_mels,
            s.window_sec,
            tied.param_layout().len(),
            s.param_layout().len()
        ),
    )
}

fn cue_arithmetic() -> Outcome {
    let key = |tonic: &str| Some(Key::new(tonic, Mode::Major).unwrap());
    let grid = |bpm: f64, k| BeatGrid::regular(0.0, bpm, 4, 32, k).unwrap();
    let cues = compute_cues(&grid(120.0, None), &grid(120.0, None), 8).unwrap();
    let frame = 512.0 / SR as f64;
    let len_ok = (cues.duration() - 16.0).abs() <= frame;
    let at = |a: f64, b: f64, ka, kb| compatible(&grid(a, ka), &grid(b, kb)).compatible;
    let bpm_ok = at(120.0, 125.0, None, None) && !at(120.0, 125.0 + 1e-9, None, None) && at(125.0, 120.0, None, None);
    let key_ok = at(120.0, 120.0, key("C"), key("D"))
        && !at(120.0, 120.0, key("C"), key("D#"))
        && at(120.0, 120.0, key("C"), key("A#"));
    outcome(
        len_ok && bpm_ok && key_ok,
        format!("C_out - C_in = {:.6} s; 5 bpm boundary {bpm_ok}; 2 semitone boundary {key_ok}", cues.duration()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 10] = [
        ("fade complement", fade_complement, Some(Duration::from_secs(1))),
        ("partition of unity", partition_of_unity, Some(Duration::from_secs(5))),
        ("mask structure", mask_structure, None),
        ("STFT round trip", stft_round_trip, Some(Duration::from_secs(5))),
        ("identity render", identity_render, None),
        ("gradient correctness", gradient_check, Some(Duration::from_secs(30))),
        ("inverse rendering recovery", inverse_rendering, Some(Duration::from_secs(120))),
        ("adversarial dynamics", adversarial_dynamics, Some(Duration::from_secs(600))),
        ("configuration fidelity", configuration, None),
        ("cue arithmetic", cue_arithmetic, None),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let t0 = Instant::now();
        let o = check();
        let elapsed = t0.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget_note = match budget {
            Some(b) if !in_time => format!(", over the {} s budget", b.as_secs()),
            _ => String::new(),
        };
        println!(
            "{} {:>2}. {name}: {} [{:.2} s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
