//! Drivers for inverse rendering and adversarial training on prepared pairs.

use djmix_core::curves::{BandLayout, Interval};
use djmix_core::disc::{DiscriminatorParams, FeatureNorm, FeaturePooling, FeatureSpec};
use djmix_core::fit::{fit_params, FitOutcome, OptConfig};
use djmix_core::gan::{FakeItem, GanConfig, GanPair, GanState, StepMetrics};
use djmix_core::grad::{LossSpec, MixProblem};
use djmix_core::mixer::{constrain, mix_magnitude, ParamLayout, RawParams};
use djmix_core::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formats::HistoryRow;
use crate::prepare::{analyze_pair, crop_to_region, PairAnalysis, PreparedPair};
use crate::stft::{SpectroConfig, Stft};

/// Uniform random raw parameters.
pub fn random_raw(layout: ParamLayout, rng: &mut ChaCha8Rng) -> RawParams {
    RawParams::new(layout, (0..layout.len()).map(|_| rng.gen::<f64>()).collect()).expect("values in [0, 1)")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    LogMag,
    LogMel,
}

/// Fit mixer parameters so the masked magnitude of `analysis` matches
/// `target` (a magnitude spectrogram on the same STFT grid).
pub fn fit_to_target(
    analysis: &PairAnalysis,
    target: &Grid,
    layout: &BandLayout,
    init: RawParams,
    loss: LossKind,
    opt: &OptConfig,
    stft: &SpectroConfig,
) -> Result<FitOutcome> {
    target.ensure_shape("target spectrogram", analysis.spectra.shape())?;
    let loss = match loss {
        LossKind::LogMag => LossSpec::log_mag(target.clone()),
        LossKind::LogMel => {
            let bank = djmix_core::mel::MelFilterbank::new(
                &djmix_core::mel::MelConfig::default(),
                stft.bins(),
                stft.sample_rate,
            )?;
            LossSpec::log_mel(target, bank)?
        }
    };
    let problem = MixProblem::new(&analysis.spectra, analysis.region, layout, &loss)?;
    Ok(fit_params(&problem, init, opt)?)
}

/// Magnitude of a reference mix cut to the pair's window.
pub fn target_magnitude(mix_mono: &[f64], pair: &PreparedPair, stft: &SpectroConfig) -> Result<Grid> {
    let window: Vec<f64> = (0..pair.len() as i64)
        .map(|n| {
            let p = pair.placement.start + n;
            if p >= 0 && (p as usize) < mix_mono.len() {
                mix_mono[p as usize]
            } else {
                0.0
            }
        })
        .collect();
    Ok(Stft::new(*stft)?.analyze(&window)?.magnitude())
}

/// A training pair reduced to the frames of its transition region.
pub fn gan_pair(pair: &PreparedPair, stft: &SpectroConfig, spec: &FeatureSpec) -> Result<GanPair> {
    let analysis = analyze_pair(pair, stft)?;
    let spectra = crop_to_region(&analysis.spectra, analysis.region, 0.0)?;
    Ok(GanPair::new(spectra, analysis.region, spec)?)
}

/// Pooled features of `pair` mixed with `raw`.
pub fn features_under(pair: &GanPair, raw: &RawParams, layout: &BandLayout) -> Result<Vec<f64>> {
    let params = constrain(raw, pair.region, layout)?;
    let mix = mix_magnitude(&params, &pair.spectra, layout)?;
    Ok(pair.pooling.features(&mix)?)
}

/// Features of a recorded mix, windowed around an annotated boundary.
pub fn real_mix_features(
    mix_mono: &[f64],
    boundary_sec: f64,
    region_sec: f64,
    window_sec: f64,
    stft: &SpectroConfig,
    spec: &FeatureSpec,
) -> Result<Vec<f64>> {
    if !(region_sec > 0.0 && region_sec <= window_sec) {
        return Err(Error::Invalid(format!("transition length {region_sec} s must be in (0, {window_sec}]")));
    }
    let sr = stft.sample_rate;
    let len = (window_sec * sr).round() as usize;
    let start = (boundary_sec * sr).round() as i64 - len as i64 / 2;
    let window: Vec<f64> = (0..len as i64)
        .map(|n| {
            let p = start + n;
            if p >= 0 && (p as usize) < mix_mono.len() {
                mix_mono[p as usize]
            } else {
                0.0
            }
        })
        .collect();
    let mag = Stft::new(*stft)?.analyze(&window)?.magnitude();
    let half = 0.5 * region_sec / window_sec;
    let region = Interval::new(0.5 - half, 0.5 + half);
    let time = stft.frame_axis(mag.rows(), len);
    let pooling = FeaturePooling::new(spec, &time, &djmix_core::curves::Axis::linear(stft.bins()), region)?;
    Ok(pooling.features(&mag)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// One generator vector for all pairs instead of one per pair.
    pub shared: bool,
    pub gan: GanConfig,
    pub param_layout: ParamLayout,
    /// Standardize discriminator inputs with statistics of the real exemplars
    /// and the initial fakes.
    pub normalize: bool,
    /// Discriminator-only steps against the initial fakes before the
    /// alternating loop. Not recorded in the history.
    pub d_warmup: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 500,
            batch_size: 4,
            seed: 0,
            shared: false,
            gan: GanConfig::default(),
            param_layout: ParamLayout::new(4, false),
            normalize: false,
            d_warmup: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generators: Vec<RawParams>,
    /// Discriminator on raw features (any normalization folded in).
    pub disc: DiscriminatorParams,
    pub history: Vec<StepMetrics>,
}

impl TrainOutcome {
    pub fn history_rows(&self) -> Vec<HistoryRow> {
        self.history
            .iter()
            .enumerate()
            .map(|(step, m)| HistoryRow { step, d_loss: m.d_loss, g_loss: m.g_loss, mean_d_fake: m.mean_d_fake })
            .collect()
    }
}

/// Initial generators: uniform random draws from the run's seed.
pub fn initial_generators(n_pairs: usize, cfg: &TrainConfig) -> Vec<RawParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = if cfg.shared { 1 } else { n_pairs };
    (0..n).map(|_| random_raw(cfg.param_layout, &mut rng)).collect()
}

/// Floor for feature standard deviations, in log-magnitude units.
const NORM_MIN_SCALE: f64 = 1e-3;

/// Alternating 1:1 discriminator/generator updates. Each step draws
/// `batch_size` fake pairs and `batch_size` real exemplars with replacement.
pub fn train_gan(
    pairs: &[GanPair],
    real: &[Vec<f64>],
    layout: &BandLayout,
    cfg: &TrainConfig,
    init: Vec<RawParams>,
) -> Result<TrainOutcome> {
    if pairs.is_empty() {
        return Err(Error::Invalid("training needs at least one pair".into()));
    }
    if real.is_empty() {
        return Err(Error::Invalid("training needs at least one real exemplar".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Invalid("batch size must be at least 1".into()));
    }
    let expected = if cfg.shared { 1 } else { pairs.len() };
    if init.len() != expected {
        return Err(Error::Invalid(format!("expected {expected} generator vectors, got {}", init.len())));
    }
    let n_features = pairs[0].pooling.len();
    if let Some(r) = real.iter().find(|r| r.len() != n_features) {
        return Err(Error::Invalid(format!("real exemplar has {} features, pairs produce {n_features}", r.len())));
    }
    let mut state = GanState::new(init, DiscriminatorParams::zeros(n_features), layout.clone(), cfg.gan)?;
    if cfg.normalize {
        let mut samples: Vec<Vec<f64>> = real.to_vec();
        for (i, pair) in pairs.iter().enumerate() {
            let generator = if cfg.shared { 0 } else { i };
            samples.push(state.fake_features(&FakeItem { pair, generator })?);
        }
        let refs: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
        state = state.with_norm(FeatureNorm::fit(&refs, NORM_MIN_SCALE)?)?;
    }
    // separate stream from the one that drew the initial generators
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xd1b5_4a32_d192_ed03);
    if cfg.d_warmup > 0 {
        // generators are frozen during warmup, so fakes are computed once
        let initial: Vec<Vec<f64>> = pairs
            .iter()
            .enumerate()
            .map(|(i, pair)| state.fake_features(&FakeItem { pair, generator: if cfg.shared { 0 } else { i } }))
            .collect::<djmix_core::Result<_>>()?;
        for _ in 0..cfg.d_warmup {
            let real_batch: Vec<&[f64]> =
                (0..cfg.batch_size).map(|_| real[rng.gen_range(0..real.len())].as_slice()).collect();
            let fake_batch: Vec<&[f64]> =
                (0..cfg.batch_size).map(|_| initial[rng.gen_range(0..initial.len())].as_slice()).collect();
            state.discriminator_step(&real_batch, &fake_batch)?;
        }
    }
    let mut history = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let real_batch: Vec<&[f64]> =
            (0..cfg.batch_size).map(|_| real[rng.gen_range(0..real.len())].as_slice()).collect();
        let fake: Vec<FakeItem> = (0..cfg.batch_size)
            .map(|_| {
                let i = rng.gen_range(0..pairs.len());
                FakeItem { pair: &pairs[i], generator: if cfg.shared { 0 } else { i } }
            })
            .collect();
        history.push(state.step(&real_batch, &fake)?);
    }
    let disc = state.raw_discriminator();
    Ok(TrainOutcome { generators: state.generators, disc, history })
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len().max(1) as f64).sqrt()
}

/// Mean over pairs of the feature RMSE between each pair mixed by its
/// generator and the same pair under a reference parameter vector.
pub fn trajectory_rmse(
    pairs: &[GanPair],
    generators: &[RawParams],
    reference: &RawParams,
    layout: &BandLayout,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, p) in pairs.iter().enumerate() {
        let g = &generators[i.min(generators.len() - 1)];
        total += rmse(&features_under(p, g, layout)?, &features_under(p, reference, layout)?);
    }
    Ok(total / pairs.len() as f64)
}
