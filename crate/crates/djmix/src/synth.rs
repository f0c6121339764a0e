//! Deterministic synthetic tracks: noise with a per-band spectral envelope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::error::Result;

/// Band edges in Hz separating the envelope bands.
pub const ENVELOPE_EDGES_HZ: [f64; 3] = [300.0, 5000.0, 12000.0];

/// Noise whose spectrum is flat at `band_gains[i]` inside band `i` of
/// [`ENVELOPE_EDGES_HZ`], scaled to `rms`.
pub fn colored_noise(seed: u64, len: usize, band_gains: [f64; 4], rms: f64) -> Result<AudioClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex64> = (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    if len > 0 {
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(len).process(&mut buf);
        let hz_per_bin = SAMPLE_RATE as f64 / len as f64;
        for (i, c) in buf.iter_mut().enumerate() {
            let f = i.min(len - i) as f64 * hz_per_bin;
            let band = ENVELOPE_EDGES_HZ.iter().filter(|&&e| f >= e).count();
            *c *= band_gains[band];
        }
        planner.plan_fft_inverse(len).process(&mut buf);
    }
    let mut x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let cur = (x.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if cur > 0.0 {
        x.iter_mut().for_each(|v| *v *= rms / cur);
    }
    AudioClip::mono(x, SAMPLE_RATE)
}

/// A track with random band gains between -24 dB and 0 dB.
pub fn random_track(seed: u64, secs: f64) -> Result<AudioClip> {
    random_track_with_spread(seed, secs, 24.0)
}

/// A track with random band gains between `-spread_db` and 0 dB.
pub fn random_track_with_spread(seed: u64, secs: f64, spread_db: f64) -> Result<AudioClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let gains = [(); 4].map(|_| 10f64.powf(-spread_db * rng.gen::<f64>() / 20.0));
    colored_noise(seed, (secs * SAMPLE_RATE as f64).round() as usize, gains, 0.1)
}

/// Geometry of a synthetic transition: both tracks at `bpm`, 4/4, with the
/// transition spanning the last `bars` bars of track 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticPairSpec {
    pub bpm: f64,
    pub bars: usize,
    pub track_bars: usize,
    pub window_sec: f64,
    /// Range of the random per-band gains in dB.
    pub spread_db: f64,
}

impl Default for SyntheticPairSpec {
    fn default() -> Self {
        SyntheticPairSpec { bpm: 120.0, bars: 2, track_bars: 6, window_sec: 8.0, spread_db: 24.0 }
    }
}

/// Aligned synthetic pair with beat-grid derived cues.
pub fn synthetic_pair(seed: u64, spec: &SyntheticPairSpec) -> Result<crate::prepare::PreparedPair> {
    use djmix_core::cueing::{compute_cues, BeatGrid};
    let bar = 4.0 * 60.0 / spec.bpm;
    let secs = spec.track_bars as f64 * bar;
    let a = random_track_with_spread(seed.wrapping_mul(2).wrapping_add(1), secs, spec.spread_db)?;
    let b = random_track_with_spread(seed.wrapping_mul(2).wrapping_add(2), secs, spec.spread_db)?;
    let g = BeatGrid::regular(0.0, spec.bpm, 4, spec.track_bars, None)?;
    let cues = compute_cues(&g, &g, spec.bars)?;
    crate::prepare::prepare_pair(&a, &b, &cues, spec.window_sec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_scaled() {
        let a = random_track(5, 0.5).unwrap();
        let b = random_track(5, 0.5).unwrap();
        assert_eq!(a, b);
        let x = a.channel(0);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((rms - 0.1).abs() < 1e-12);
        assert_ne!(random_track(6, 0.5).unwrap(), a);
    }

    #[test]
    fn envelope_shapes_spectrum() {
        let clip = colored_noise(1, 1 << 15, [1.0, 0.0, 0.0, 0.0], 0.1).unwrap();
        let mut buf: Vec<Complex64> = clip.channel(0).iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let hz = SAMPLE_RATE as f64 / buf.len() as f64;
        let above: f64 = buf[..buf.len() / 2]
            .iter()
            .enumerate()
            .filter(|(i, _)| *i as f64 * hz > 400.0)
            .map(|(_, c)| c.norm_sqr())
            .sum();
        assert!(above < 1e-12, "{above}");
    }
}
