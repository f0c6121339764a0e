//! Aligning two tracks into a fixed-length window around the transition.

use djmix_core::cueing::{CuePoints, WindowPlacement};
use djmix_core::curves::Interval;
use djmix_core::mixer::PairSpectra;
use djmix_core::Grid;

use crate::audio::{resample, AudioClip, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::stft::{ComplexSpectrogram, SpectroConfig, Stft};

/// Both tracks on the same window-sized timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPair {
    /// Outgoing track, silent after `C_out`.
    pub x1: AudioClip,
    /// Incoming track, silent before `C_in`.
    pub x2: AudioClip,
    pub placement: WindowPlacement,
    pub cues: CuePoints,
}

impl PreparedPair {
    /// Transition region normalized to the window.
    pub fn region(&self) -> Interval {
        self.placement.normalized()
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.x1.sample_rate()
    }

    /// Window-relative sample indices of `C_in` and `C_out`.
    pub fn region_samples(&self) -> (i64, i64) {
        let p = &self.placement;
        (p.c_in - p.start, p.c_out - p.start)
    }
}

/// Cut a `window_sec` window centred on the cue midpoint. `x2` is placed so its
/// sample 0 sits at `cues.b_offset` on `x1`'s timeline. Inputs at other rates
/// are resampled to the working rate; mismatched channel counts are mixed down.
pub fn prepare_pair(x1: &AudioClip, x2: &AudioClip, cues: &CuePoints, window_sec: f64) -> Result<PreparedPair> {
    let mut x1 = resample(x1, SAMPLE_RATE)?;
    let mut x2 = resample(x2, SAMPLE_RATE)?;
    if x1.n_channels() != x2.n_channels() {
        x1 = AudioClip::mono(x1.to_mono(), SAMPLE_RATE)?;
        x2 = AudioClip::mono(x2.to_mono(), SAMPLE_RATE)?;
    }
    let sr = SAMPLE_RATE as f64;
    let placement = WindowPlacement::new(cues, window_sec, sr)?;
    if placement.c_in >= x1.len() as i64 {
        return Err(Error::Invalid(format!(
            "C_in = {:.3} s lies beyond the end of track 1 ({:.3} s)",
            cues.c_in,
            x1.duration_sec()
        )));
    }
    let x2_at_cin = placement.c_in - placement.b_offset;
    if x2_at_cin < 0 || x2_at_cin >= x2.len() as i64 {
        return Err(Error::Invalid(format!(
            "track 2 has no audio at C_in = {:.3} s (offset {:.3} s, length {:.3} s)",
            cues.c_in,
            cues.b_offset,
            x2.duration_sec()
        )));
    }
    let len = placement.len;
    let cut = |src: &AudioClip, offset: i64, from: i64, to: i64| -> Result<AudioClip> {
        let channels = src
            .channels()
            .iter()
            .map(|c| {
                (0..len as i64)
                    .map(|n| {
                        let p = placement.start + n;
                        let q = p - offset;
                        if p >= from && p < to && q >= 0 && (q as usize) < c.len() {
                            c[q as usize]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        AudioClip::new(channels, SAMPLE_RATE)
    };
    let a = cut(&x1, 0, i64::MIN, placement.c_out)?;
    let b = cut(&x2, placement.b_offset, placement.c_in, i64::MAX)?;
    Ok(PreparedPair { x1: a, x2: b, placement, cues: *cues })
}

/// Complex spectra of both (mono) tracks plus the magnitude pair on frame-centre axes.
#[derive(Debug, Clone)]
pub struct PairAnalysis {
    pub s1: ComplexSpectrogram,
    pub s2: ComplexSpectrogram,
    pub spectra: PairSpectra,
    pub region: Interval,
}

pub fn analyze_pair(pair: &PreparedPair, cfg: &SpectroConfig) -> Result<PairAnalysis> {
    let plan = Stft::new(*cfg)?;
    let s1 = plan.analyze(&pair.x1.to_mono())?;
    let s2 = plan.analyze(&pair.x2.to_mono())?;
    let time = cfg.frame_axis(s1.frames(), pair.len());
    let freq = djmix_core::curves::Axis::linear(cfg.bins());
    let spectra = PairSpectra::with_axes(time, freq, s1.magnitude(), s2.magnitude())?;
    Ok(PairAnalysis { s1, s2, spectra, region: pair.region() })
}

/// Rows of `spectra` whose frame centre lies within `margin` of `region`.
/// Outside the region every mask is constant, so losses and features only
/// depend on these frames.
pub fn crop_to_region(spectra: &PairSpectra, region: Interval, margin: f64) -> Result<PairSpectra> {
    let keep: Vec<usize> = spectra
        .time
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= region.lo - margin && v <= region.hi + margin)
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::Invalid("no STFT frame falls inside the transition region".into()));
    }
    let bins = spectra.freq.len();
    let rows = |g: &Grid| Grid::from_fn(keep.len(), bins, |r, f| g.get(keep[r], f));
    let time = djmix_core::curves::Axis::from_values(keep.iter().map(|&i| spectra.time.values()[i]).collect())?;
    Ok(PairSpectra::with_axes(time, spectra.freq.clone(), rows(&spectra.track1), rows(&spectra.track2))?)
}
