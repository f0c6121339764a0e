//! Clipped-ramp curve primitives.
//!
//! A single template, `prelu1(v, s, delta) = min(max(0, min(max(0, v - s), 1) * delta), 1)`,
//! gives fade-ins along time, fade-outs as its complement, and low-pass
//! responses along frequency. Chaining `k - 1` low-pass curves splits the
//! spectrum into `k` bands that sum to one at every bin.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Offset added to the denominator of the minimum slope, `1 / (hi - s + eps)`.
pub const SLOPE_EPS: f64 = 1e-6;

/// Tolerance when checking that a ramp saturates by the end of its interval.
/// Covers the `SLOPE_EPS` offset plus rounding.
pub const CONSTRAINT_SLACK: f64 = SLOPE_EPS + 1e-12;

/// Closed interval on a normalized `[0, 1]` axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Start and slope of one ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadeParams {
    pub start: f64,
    pub slope: f64,
}

/// Which axis a [`FadeParams`] is bound to. Only used to name the violated
/// inequality in errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    Time,
    Frequency,
}

impl FadeParams {
    pub const fn new(start: f64, slope: f64) -> Self {
        FadeParams { start, slope }
    }

    /// Point where the ramp reaches one.
    pub fn saturation(&self) -> f64 {
        self.start + 1.0 / self.slope
    }

    /// Check `lo <= s <= hi` and `delta >= 1 / (hi - s)` (up to [`CONSTRAINT_SLACK`]).
    pub fn validate(&self, bound: Interval, binding: Binding) -> Result<()> {
        let (lo, hi, s, d) = match binding {
            Binding::Time => ("C_in", "C_out", "s_t", "delta_t"),
            Binding::Frequency => ("f_min", "f_max", "s_f", "delta_f"),
        };
        if !self.start.is_finite() || !self.slope.is_finite() {
            return Err(Error::Constraint(format!("{s} and {d} must be finite")));
        }
        if !(self.slope > 0.0) {
            return Err(Error::Constraint(format!("{d} > 0 (got {})", self.slope)));
        }
        if self.start < bound.lo {
            return Err(Error::Constraint(format!("{lo} <= {s} ({} < {})", self.start, bound.lo)));
        }
        if self.start > bound.hi {
            return Err(Error::Constraint(format!("{s} <= {hi} ({} > {})", self.start, bound.hi)));
        }
        if self.saturation() > bound.hi + CONSTRAINT_SLACK {
            return Err(Error::Constraint(format!(
                "{d} >= 1/({hi} - {s}) (ramp saturates at {} beyond {hi}={})",
                self.saturation(),
                bound.hi
            )));
        }
        Ok(())
    }
}

/// Linear sequence of sample positions on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    values: Vec<f64>,
}

impl Axis {
    /// `n` points from 0 to 1 inclusive.
    pub fn linear(n: usize) -> Self {
        let values = match n {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => {
                let last = (n - 1) as f64;
                (0..n).map(|i| i as f64 / last).collect()
            }
        };
        Axis { values }
    }

    /// Contiguous sub-range of a linear axis with `n` points.
    pub fn linear_range(n: usize, range: core::ops::Range<usize>) -> Self {
        let mut full = Self::linear(n);
        full.values.truncate(range.end);
        full.values.drain(..range.start);
        full
    }

    /// Arbitrary finite, non-decreasing positions (e.g. STFT frame centres).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("axis positions must be finite and non-decreasing".into()));
        }
        Ok(Axis { values })
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
}

/// Band boundaries for a `k`-band EQ: `k - 1` intervals `(f_min_i, f_max_i)`
/// in normalized frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLayout {
    boundaries: Vec<Interval>,
}

/// Band edges in Hz for a `k`-band layout. `k = 4` gives 20/300/5000/20000;
/// other `k` use `k` geometrically spaced edges over the same span.
pub fn default_edges_hz(k: usize) -> Vec<f64> {
    match k {
        0 | 1 => Vec::new(),
        4 => vec![20.0, 300.0, 5000.0, 20000.0],
        _ => {
            let (lo, hi) = (libm::log(20.0), libm::log(20000.0));
            (0..k).map(|i| libm::exp(lo + (hi - lo) * i as f64 / (k - 1) as f64)).collect()
        }
    }
}

impl BandLayout {
    pub fn new(boundaries: Vec<Interval>) -> Result<Self> {
        for (i, b) in boundaries.iter().enumerate() {
            if !(0.0..=1.0).contains(&b.lo) || !(0.0..=1.0).contains(&b.hi) {
                return Err(Error::InvalidLayout(format!("boundary {} = ({}, {}) outside [0, 1]", i + 1, b.lo, b.hi)));
            }
            if !(b.lo < b.hi) {
                return Err(Error::InvalidLayout(format!(
                    "boundary {} requires f_min < f_max, got ({}, {})",
                    i + 1,
                    b.lo,
                    b.hi
                )));
            }
            if i > 0 && boundaries[i - 1].hi > b.lo {
                return Err(Error::InvalidLayout(format!(
                    "misordered boundaries: f_max_{} = {} > f_min_{} = {}",
                    i,
                    boundaries[i - 1].hi,
                    i + 1,
                    b.lo
                )));
            }
        }
        Ok(BandLayout { boundaries })
    }

    /// Single band, no filters.
    pub fn single() -> Self {
        BandLayout { boundaries: Vec::new() }
    }

    /// Build from `k` edges in Hz; boundary `i` spans `(edges[i], edges[i+1])`.
    /// Frequencies are normalized by the Nyquist rate.
    pub fn from_hz(k: usize, edges_hz: &[f64], sample_rate: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidLayout("k must be at least 1".into()));
        }
        if k == 1 {
            return Ok(Self::single());
        }
        if edges_hz.len() != k {
            return Err(Error::InvalidLayout(format!("{k} bands need {k} edges, got {}", edges_hz.len())));
        }
        let nyquist = sample_rate / 2.0;
        let boundaries = edges_hz.windows(2).map(|w| Interval::new(w[0] / nyquist, w[1] / nyquist)).collect();
        Self::new(boundaries)
    }

    pub fn k(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn boundaries(&self) -> &[Interval] {
        &self.boundaries
    }
}

#[inline]
pub fn prelu1(v: f64, start: f64, slope: f64) -> f64 {
    f64::min(f64::max(0.0, f64::min(f64::max(0.0, v - start), 1.0) * slope), 1.0)
}

pub fn prelu1_curve(axis: &Axis, p: FadeParams) -> Vec<f64> {
    axis.values.iter().map(|&v| prelu1(v, p.start, p.slope)).collect()
}

pub(crate) fn fade_out_curve(axis: &Axis, p: FadeParams) -> Vec<f64> {
    axis.values.iter().map(|&v| 1.0 - prelu1(v, p.start, p.slope)).collect()
}

/// Fade-in along time; `region` is the transition region `[C_in, C_out]`.
pub fn fade_in(axis: &Axis, p: FadeParams, region: Interval) -> Result<Vec<f64>> {
    p.validate(region, Binding::Time)?;
    Ok(prelu1_curve(axis, p))
}

pub fn fade_out(axis: &Axis, p: FadeParams, region: Interval) -> Result<Vec<f64>> {
    p.validate(region, Binding::Time)?;
    Ok(fade_out_curve(axis, p))
}

/// Low-pass response along frequency, constrained to `band`.
pub fn lowpass_curve(axis: &Axis, p: FadeParams, band: Interval) -> Result<Vec<f64>> {
    p.validate(band, Binding::Frequency)?;
    Ok(fade_out_curve(axis, p))
}

pub(crate) fn validate_filters(layout: &BandLayout, filters: &[FadeParams]) -> Result<()> {
    if filters.len() != layout.boundaries.len() {
        return Err(Error::InvalidArgument(format!(
            "{} bands need {} filters, got {}",
            layout.k(),
            layout.boundaries.len(),
            filters.len()
        )));
    }
    for (i, (f, b)) in filters.iter().zip(&layout.boundaries).enumerate() {
        f.validate(*b, Binding::Frequency).map_err(|e| match e {
            Error::Constraint(msg) => Error::Constraint(format!("filter {}: {msg}", i + 1)),
            other => other,
        })?;
    }
    Ok(())
}

/// The `k` band responses from already evaluated low-pass curves.
pub(crate) fn bands_from_lowpass(lowpass: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let k = lowpass.len() + 1;
    if k == 1 {
        return vec![vec![1.0; n]];
    }
    let mut bands = Vec::with_capacity(k);
    bands.push(lowpass[0].clone());
    for i in 1..k - 1 {
        bands.push(lowpass[i].iter().zip(&lowpass[i - 1]).map(|(a, b)| a - b).collect());
    }
    bands.push(lowpass[k - 2].iter().map(|l| 1.0 - l).collect());
    bands
}

/// Band responses `H^1..H^k` for `k - 1` ordered low-pass filters.
pub fn band_curves(axis: &Axis, layout: &BandLayout, filters: &[FadeParams]) -> Result<Vec<Vec<f64>>> {
    validate_filters(layout, filters)?;
    let lowpass: Vec<Vec<f64>> = filters.iter().map(|&f| fade_out_curve(axis, f)).collect();
    Ok(bands_from_lowpass(&lowpass, axis.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_layout() -> BandLayout {
        BandLayout::from_hz(4, &[20.0, 300.0, 5000.0, 20000.0], 44100.0).unwrap()
    }

    #[test]
    fn prelu1_hand_values() {
        assert_eq!(prelu1(0.0, 0.5, 2.0), 0.0);
        assert_eq!(prelu1(1.0, 0.0, 1.0), 1.0);
        assert_eq!(prelu1(0.5, 0.25, 4.0), 1.0);
        assert_eq!(prelu1(0.5, 0.25, 2.0), 0.5);
    }

    #[test]
    fn fades_complement_and_never_start() {
        let axis = Axis::linear(101);
        let region = Interval::new(0.0, 1.0);
        let p = FadeParams::new(0.3, 2.5);
        let a = fade_in(&axis, p, region).unwrap();
        let b = fade_out(&axis, p, region).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x + y - 1.0).abs() <= 1e-15);
        }
        let never = FadeParams::new(1.0, 1e7);
        assert!(fade_in(&axis, never, region).unwrap().iter().all(|&x| x == 0.0));
        assert!(fade_out(&axis, never, region).unwrap().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn slope_at_bound_reaches_one_at_cue_out() {
        let axis = Axis::linear(5);
        let region = Interval::new(0.25, 0.75);
        let curve = fade_in(&axis, FadeParams::new(0.25, 2.0), region).unwrap();
        assert_eq!(curve[3], 1.0);
        assert_eq!(curve[2], 0.5);
    }

    #[test]
    fn fade_constraint_errors_name_inequality() {
        let region = Interval::new(0.25, 0.75);
        let axis = Axis::linear(8);
        let err = fade_in(&axis, FadeParams::new(0.1, 10.0), region).unwrap_err();
        assert!(matches!(err, Error::Constraint(ref m) if m.contains("C_in <= s_t")), "{err}");
        let err = fade_in(&axis, FadeParams::new(0.5, 2.0), region).unwrap_err();
        assert!(matches!(err, Error::Constraint(ref m) if m.contains("delta_t >= 1/(C_out - s_t)")));
        let err = fade_out(&axis, FadeParams::new(0.8, 100.0), region).unwrap_err();
        assert!(matches!(err, Error::Constraint(ref m) if m.contains("s_t <= C_out")));
    }

    #[test]
    fn lowpass_hand_values() {
        let band = Interval::new(0.1, 0.5);
        let axis = Axis::linear(11);
        let h = lowpass_curve(&axis, FadeParams::new(0.2, 5.0), band).unwrap();
        assert_eq!(h[0], 1.0);
        assert!((h[3] - 0.5).abs() < 1e-12);
        // start at f_max with a step slope: passband right up to f_max
        let h = lowpass_curve(&axis, FadeParams::new(0.5, 1e7), band).unwrap();
        for (v, x) in axis.values().iter().zip(&h) {
            if *v <= 0.5 {
                assert_eq!(*x, 1.0);
            } else {
                assert_eq!(*x, 0.0);
            }
        }
    }

    #[test]
    fn two_band_split_at_three_quarters() {
        let layout = BandLayout::new(vec![Interval::new(0.5, 1.0)]).unwrap();
        let axis = Axis::linear(5);
        let bands = band_curves(&axis, &layout, &[FadeParams::new(0.5, 2.0)]).unwrap();
        assert_eq!(bands[0][3], 0.5);
        assert_eq!(bands[1][3], 0.5);
    }

    #[test]
    fn paper_edges_normalize() {
        let layout = paper_layout();
        let b = layout.boundaries();
        assert_eq!(layout.k(), 4);
        assert!((b[0].lo - 0.000907).abs() < 1e-6);
        assert!((b[0].hi - 0.013605).abs() < 1e-6);
        assert!((b[1].hi - 0.226757).abs() < 1e-6);
        assert!((b[2].hi - 0.907029).abs() < 1e-6);
    }

    #[test]
    fn lowest_bin_belongs_to_band_one() {
        let layout = paper_layout();
        let filters: Vec<FadeParams> =
            layout.boundaries().iter().map(|b| FadeParams::new(b.mid(), 1.0 / (b.hi - b.mid()))).collect();
        let bands = band_curves(&Axis::linear(1025), &layout, &filters).unwrap();
        assert_eq!(bands[0][0], 1.0);
        assert!(bands[1..].iter().all(|b| b[0] == 0.0));
    }

    #[test]
    fn misordered_layout_rejected() {
        let err = BandLayout::new(vec![Interval::new(0.1, 0.4), Interval::new(0.3, 0.6)]).unwrap_err();
        assert!(matches!(err, Error::InvalidLayout(ref m) if m.contains("misordered")));
        assert!(BandLayout::from_hz(4, &[20.0, 300.0, 5000.0, 30000.0], 44100.0).is_err());
    }

    #[test]
    fn filter_count_must_match_layout() {
        let layout = paper_layout();
        assert!(band_curves(&Axis::linear(9), &layout, &[FadeParams::new(0.001, 1e4)]).is_err());
    }

    #[test]
    fn single_band_is_flat() {
        let bands = band_curves(&Axis::linear(7), &BandLayout::single(), &[]).unwrap();
        assert_eq!(bands, vec![vec![1.0; 7]]);
    }

    #[test]
    fn axis_linear_endpoints() {
        let a = Axis::linear(1025);
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.values()[1024], 1.0);
        assert!(a.values().windows(2).all(|w| w[0] < w[1]));
        let r = Axis::linear_range(9, 2..5);
        assert_eq!(r.values(), &Axis::linear(9).values()[2..5]);
    }
}
