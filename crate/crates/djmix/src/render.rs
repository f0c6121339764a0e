//! Masked resynthesis of a prepared pair.

use djmix_core::curves::{Axis, BandLayout};
use djmix_core::mixer::{build_masks_on, MixerParams};
use djmix_core::Grid;

use crate::audio::AudioClip;
use crate::error::Result;
use crate::prepare::PreparedPair;
use crate::stft::{SpectroConfig, Stft};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RenderConfig {
    pub stft: SpectroConfig,
    /// Mask every channel separately instead of rendering the mono downmix.
    pub per_channel: bool,
}

/// Output of a mixer run. `peak_gain` is the factor the peak policy applied
/// (1 when the mix did not exceed full scale).
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub clip: AudioClip,
    pub peak_gain: f64,
}

/// Scale every channel by `1 / max|x|` when the peak exceeds 1.
pub fn peak_policy(channels: &mut [Vec<f64>]) -> f64 {
    let peak = channels.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 1.0 {
        let g = 1.0 / peak;
        for x in channels.iter_mut().flatten() {
            *x *= g;
        }
        g
    } else {
        1.0
    }
}

pub(crate) fn finish(mut channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Rendered> {
    let peak_gain = peak_policy(&mut channels);
    Ok(Rendered { clip: AudioClip::new(channels, sample_rate)?, peak_gain })
}

fn channels_for(pair: &PreparedPair, per_channel: bool) -> Vec<(Vec<f64>, Vec<f64>)> {
    if per_channel {
        pair.x1.channels().iter().cloned().zip(pair.x2.channels().iter().cloned()).collect()
    } else {
        vec![(pair.x1.to_mono(), pair.x2.to_mono())]
    }
}

/// `istft(M1 S1) + istft(M2 S2)` per channel, before the peak policy.
pub fn render_with_masks(pair: &PreparedPair, m1: &Grid, m2: &Grid, cfg: &RenderConfig) -> Result<Vec<Vec<f64>>> {
    let plan = Stft::new(cfg.stft)?;
    let len = pair.len();
    channels_for(pair, cfg.per_channel)
        .into_iter()
        .map(|(a, b)| {
            let y1 = plan.synthesize_len(&plan.analyze(&a)?.masked(m1)?, len)?;
            let y2 = plan.synthesize_len(&plan.analyze(&b)?.masked(m2)?, len)?;
            Ok(y1.iter().zip(&y2).map(|(p, q)| p + q).collect())
        })
        .collect()
}

/// Masks of `params` on the STFT grid of `pair`: frame centres on the time
/// axis, bins over `[0, Nyquist]` on the frequency axis.
pub fn masks_for(
    pair: &PreparedPair,
    params: &MixerParams,
    layout: &BandLayout,
    stft: &SpectroConfig,
) -> Result<(Grid, Grid)> {
    let frames = stft.frame_count(pair.len())?;
    let time = stft.frame_axis(frames, pair.len());
    Ok(build_masks_on(params, &time, &Axis::linear(stft.bins()), layout)?)
}

/// Mix of a prepared pair under `params`; original phases are reused.
pub fn render(pair: &PreparedPair, params: &MixerParams, layout: &BandLayout, cfg: &RenderConfig) -> Result<Rendered> {
    params.validate(pair.region(), layout)?;
    let (m1, m2) = masks_for(pair, params, layout, &cfg.stft)?;
    finish(render_with_masks(pair, &m1, &m2, cfg)?, pair.sample_rate())
}
