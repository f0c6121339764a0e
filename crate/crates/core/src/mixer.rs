//! Mask assembly and application.
//!
//! Track 1 (outgoing) is shaped by `M1 = sum_i fade_out_i (x) H1_i` and track 2
//! (incoming) by `M2 = sum_i fade_in_i (x) H2_i`, where `(x)` is the outer
//! product of a time curve with a frequency band response.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::curves::{
    bands_from_lowpass, fade_out_curve, prelu1_curve, validate_filters, Axis, BandLayout, Binding, FadeParams,
    Interval, SLOPE_EPS,
};
use crate::grid::{Grid, MagnitudeSpectrogram, Mask};
use crate::{Error, Result};

/// Ratio between the largest and smallest slope reachable through [`constrain`].
pub const SLOPE_RANGE: f64 = 50.0;

/// Fade and filter parameters of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackParams {
    /// One time fade per band.
    pub fades: Vec<FadeParams>,
    /// One low-pass filter per band boundary.
    pub filters: Vec<FadeParams>,
}

/// Parameters of both tracks. Track 1 fades out, track 2 fades in.
#[derive(Debug, Clone, PartialEq)]
pub struct MixerParams {
    pub track1: TrackParams,
    pub track2: TrackParams,
}

impl MixerParams {
    pub fn k(&self) -> usize {
        self.track1.fades.len()
    }

    /// Check every fade against the transition region and every filter
    /// against its band boundary.
    pub fn validate(&self, region: Interval, layout: &BandLayout) -> Result<()> {
        check_region(region)?;
        for (name, track) in [("track1", &self.track1), ("track2", &self.track2)] {
            if track.fades.len() != layout.k() {
                return Err(Error::InvalidArgument(format!(
                    "{name}: {} bands need {} fades, got {}",
                    layout.k(),
                    layout.k(),
                    track.fades.len()
                )));
            }
            for (i, f) in track.fades.iter().enumerate() {
                f.validate(region, Binding::Time).map_err(|e| prefix(e, name, "fade", i))?;
            }
            validate_filters(layout, &track.filters).map_err(|e| match e {
                Error::Constraint(m) => Error::Constraint(format!("{name}: {m}")),
                other => other,
            })?;
        }
        Ok(())
    }
}

fn prefix(e: Error, track: &str, what: &str, i: usize) -> Error {
    match e {
        Error::Constraint(m) => Error::Constraint(format!("{track} {what} {}: {m}", i + 1)),
        other => other,
    }
}

pub(crate) fn check_region(region: Interval) -> Result<()> {
    if !(region.lo >= 0.0 && region.lo < region.hi && region.hi <= 1.0) {
        return Err(Error::InvalidCues { c_in: region.lo, c_out: region.hi });
    }
    Ok(())
}

/// Shape of the raw parameter vector.
///
/// Per track: `k` fades then `k - 1` filters, each as `(u_start, u_slope)`.
/// With `tie_last_fade` fade `k` reuses fade `k - 1`, giving `8 (k - 1)`
/// scalars in total instead of `2 (4k - 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub k: usize,
    pub tie_last_fade: bool,
}

impl ParamLayout {
    pub const fn new(k: usize, tie_last_fade: bool) -> Self {
        ParamLayout { k, tie_last_fade }
    }

    /// Number of independent fades per track.
    pub fn free_fades(&self) -> usize {
        if self.tie_last_fade && self.k >= 2 {
            self.k - 1
        } else {
            self.k
        }
    }

    pub fn per_track(&self) -> usize {
        2 * self.free_fades() + 2 * (self.k - 1)
    }

    pub fn len(&self) -> usize {
        2 * self.per_track()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Raw index pair `(u_start, u_slope)` backing fade `i` of `track` (0 or 1).
    pub fn fade_index(&self, track: usize, i: usize) -> usize {
        let slot = i.min(self.free_fades() - 1);
        track * self.per_track() + 2 * slot
    }

    pub fn filter_index(&self, track: usize, b: usize) -> usize {
        track * self.per_track() + 2 * self.free_fades() + 2 * b
    }
}

/// Unconstrained search-space point: every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawParams {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl RawParams {
    pub fn new(layout: ParamLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::InvalidArgument(format!(
                "raw parameter vector needs {} entries, got {}",
                layout.len(),
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("raw entry {i} = {v} outside [0, 1]")));
        }
        Ok(RawParams { layout, values })
    }

    pub fn filled(layout: ParamLayout, value: f64) -> Self {
        RawParams { layout, values: vec![value.clamp(0.0, 1.0); layout.len()] }
    }

    pub(crate) fn from_unchecked(layout: ParamLayout, values: Vec<f64>) -> Self {
        RawParams { layout, values }
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Replace values, clamping each into `[0, 1]`.
    pub fn set_clamped(&mut self, values: &[f64]) {
        for (dst, &v) in self.values.iter_mut().zip(values) {
            *dst = if v.is_nan() { *dst } else { v.clamp(0.0, 1.0) };
        }
    }

    pub fn values_mut_unclamped(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn clamp(&mut self) {
        for v in &mut self.values {
            *v = v.clamp(0.0, 1.0);
        }
    }
}

/// Map a pair `(u_start, u_slope)` into an interval.
///
/// `s = lo + u_s (hi - lo)`, `delta = (1 + u_d (R - 1)) / (hi - s + eps)`.
#[inline]
pub fn bind_ramp(u_start: f64, u_slope: f64, bound: Interval) -> FadeParams {
    let start = bound.lo + u_start * (bound.hi - bound.lo);
    let slope = (1.0 + u_slope * (SLOPE_RANGE - 1.0)) / (bound.hi - start + SLOPE_EPS);
    FadeParams { start, slope }
}

/// Partial derivatives of [`bind_ramp`]: `(ds/du_s, d delta/du_s, d delta/du_d)`.
#[inline]
pub(crate) fn bind_ramp_jacobian(u_start: f64, u_slope: f64, bound: Interval) -> (f64, f64, f64) {
    let width = bound.hi - bound.lo;
    let start = bound.lo + u_start * width;
    let gap = bound.hi - start + SLOPE_EPS;
    let slope = (1.0 + u_slope * (SLOPE_RANGE - 1.0)) / gap;
    (width, slope / gap * width, (SLOPE_RANGE - 1.0) / gap)
}

pub(crate) fn constrain_unchecked(raw: &RawParams, region: Interval, layout: &BandLayout) -> MixerParams {
    let pl = raw.layout;
    let u = &raw.values;
    let track = |t: usize| {
        let fades = (0..pl.k)
            .map(|i| {
                let j = pl.fade_index(t, i);
                bind_ramp(u[j], u[j + 1], region)
            })
            .collect();
        let filters = layout
            .boundaries()
            .iter()
            .enumerate()
            .map(|(b, bound)| {
                let j = pl.filter_index(t, b);
                bind_ramp(u[j], u[j + 1], *bound)
            })
            .collect();
        TrackParams { fades, filters }
    };
    MixerParams { track1: track(0), track2: track(1) }
}

/// Map raw `[0, 1]` coordinates onto parameters that satisfy every fader and
/// filter constraint.
pub fn constrain(raw: &RawParams, region: Interval, layout: &BandLayout) -> Result<MixerParams> {
    check_region(region)?;
    if raw.layout.k != layout.k() {
        return Err(Error::InvalidArgument(format!(
            "raw parameters are laid out for k={}, band layout has k={}",
            raw.layout.k,
            layout.k()
        )));
    }
    if let Some((i, v)) = raw.values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidArgument(format!("raw entry {i} = {v} outside [0, 1]")));
    }
    Ok(constrain_unchecked(raw, region, layout))
}

/// Evaluated time gains and band responses of one track.
#[derive(Debug, Clone)]
pub(crate) struct TrackCurves {
    /// `k` time curves (fade-out for track 1, fade-in for track 2).
    pub gains: Vec<Vec<f64>>,
    /// `k` frequency band responses.
    pub bands: Vec<Vec<f64>>,
}

impl TrackCurves {
    pub fn evaluate(tp: &TrackParams, outgoing: bool, time: &Axis, freq: &Axis) -> Self {
        let gains =
            tp.fades.iter().map(|&f| if outgoing { fade_out_curve(time, f) } else { prelu1_curve(time, f) }).collect();
        let lowpass: Vec<Vec<f64>> = tp.filters.iter().map(|&f| fade_out_curve(freq, f)).collect();
        let bands = bands_from_lowpass(&lowpass, freq.len());
        TrackCurves { gains, bands }
    }

    pub fn mask(&self, frames: usize, bins: usize) -> Mask {
        let mut m = Grid::zeros(frames, bins);
        for t in 0..frames {
            let row = m.row_mut(t);
            for (g, h) in self.gains.iter().zip(&self.bands) {
                let gt = g[t];
                for (dst, &hf) in row.iter_mut().zip(h) {
                    *dst += gt * hf;
                }
            }
        }
        m
    }
}

fn check_structure(params: &MixerParams, layout: &BandLayout) -> Result<()> {
    for track in [&params.track1, &params.track2] {
        if track.fades.len() != layout.k() {
            return Err(Error::InvalidArgument(format!(
                "{} bands need {} fades per track, got {}",
                layout.k(),
                layout.k(),
                track.fades.len()
            )));
        }
        for (i, f) in track.fades.iter().enumerate() {
            if !(f.slope > 0.0) || !(0.0..=1.0).contains(&f.start) {
                return Err(Error::Constraint(format!("fade {}: requires 0 <= s_t <= 1 and delta_t > 0", i + 1)));
            }
        }
        validate_filters(layout, &track.filters)?;
    }
    Ok(())
}

/// Both masks on linear axes with `frames x bins` points.
pub fn build_masks(params: &MixerParams, frames: usize, bins: usize, layout: &BandLayout) -> Result<(Mask, Mask)> {
    build_masks_on(params, &Axis::linear(frames), &Axis::linear(bins), layout)
}

/// Both masks on arbitrary axes (e.g. a sub-range of frames).
pub fn build_masks_on(params: &MixerParams, time: &Axis, freq: &Axis, layout: &BandLayout) -> Result<(Mask, Mask)> {
    check_structure(params, layout)?;
    let c1 = TrackCurves::evaluate(&params.track1, true, time, freq);
    let c2 = TrackCurves::evaluate(&params.track2, false, time, freq);
    Ok((c1.mask(time.len(), freq.len()), c2.mask(time.len(), freq.len())))
}

/// `(|S1| * M1, |S2| * M2)`, entrywise.
pub fn apply_masks(
    s1: &MagnitudeSpectrogram,
    s2: &MagnitudeSpectrogram,
    m1: &Mask,
    m2: &Mask,
) -> Result<(MagnitudeSpectrogram, MagnitudeSpectrogram)> {
    let shape = s1.shape();
    s2.ensure_shape("track 2 spectrogram", shape)?;
    m1.ensure_shape("mask 1", shape)?;
    m2.ensure_shape("mask 2", shape)?;
    let prod = |s: &Grid, m: &Grid| {
        let data = s.data().iter().zip(m.data()).map(|(a, b)| a * b).collect();
        Grid::from_vec(shape.0, shape.1, data).expect("shape checked")
    };
    Ok((prod(s1, m1), prod(s2, m2)))
}

/// Magnitude spectra of both tracks on shared axes. `time` may cover only a
/// sub-range of the frames of the full window.
#[derive(Debug, Clone)]
pub struct PairSpectra {
    pub time: Axis,
    pub freq: Axis,
    pub track1: MagnitudeSpectrogram,
    pub track2: MagnitudeSpectrogram,
}

impl PairSpectra {
    /// Pair on full linear axes matching the spectrogram shape.
    pub fn new(track1: MagnitudeSpectrogram, track2: MagnitudeSpectrogram) -> Result<Self> {
        let (t, f) = track1.shape();
        Self::with_axes(Axis::linear(t), Axis::linear(f), track1, track2)
    }

    pub fn with_axes(
        time: Axis,
        freq: Axis,
        track1: MagnitudeSpectrogram,
        track2: MagnitudeSpectrogram,
    ) -> Result<Self> {
        let shape = (time.len(), freq.len());
        track1.ensure_shape("track 1 spectrogram", shape)?;
        track2.ensure_shape("track 2 spectrogram", shape)?;
        Ok(PairSpectra { time, freq, track1, track2 })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.track1.shape()
    }
}

/// Summed masked magnitude `|S1| M1 + |S2| M2` for already-constrained params.
pub fn mix_magnitude(params: &MixerParams, pair: &PairSpectra, layout: &BandLayout) -> Result<MagnitudeSpectrogram> {
    check_structure(params, layout)?;
    Ok(mix_magnitude_unchecked(params, pair))
}

pub(crate) fn mix_magnitude_unchecked(params: &MixerParams, pair: &PairSpectra) -> MagnitudeSpectrogram {
    let c1 = TrackCurves::evaluate(&params.track1, true, &pair.time, &pair.freq);
    let c2 = TrackCurves::evaluate(&params.track2, false, &pair.time, &pair.freq);
    mix_from_curves(&c1, &c2, pair)
}

pub(crate) fn mix_from_curves(c1: &TrackCurves, c2: &TrackCurves, pair: &PairSpectra) -> Grid {
    let (frames, bins) = pair.shape();
    let m1 = c1.mask(frames, bins);
    let m2 = c2.mask(frames, bins);
    let data = m1
        .data()
        .iter()
        .zip(pair.track1.data())
        .zip(m2.data().iter().zip(pair.track2.data()))
        .map(|((m1, a1), (m2, a2))| m1 * a1 + m2 * a2)
        .collect();
    Grid::from_vec(frames, bins, data).expect("shape checked")
}

/// Parameters that reproduce a plain linear crossfade over the whole
/// region on every band: all fades start at `C_in` with slope `1/(C_out - C_in + eps)`.
pub fn linear_crossfade_raw(layout: ParamLayout) -> RawParams {
    let mut values = vec![0.5; layout.len()];
    for t in 0..2 {
        for i in 0..layout.free_fades() {
            let j = layout.fade_index(t, i);
            values[j] = 0.0;
            values[j + 1] = 0.0;
        }
    }
    RawParams { layout, values }
}
