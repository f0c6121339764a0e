//! Analytic gradients of spectrogram losses with respect to raw parameters,
//! and a central-difference harness to check them.
//!
//! The backward pass follows the rank-one structure of the masks: with
//! `P = dL/dmix * |S|`, the time curves receive `P . H_i` and the band
//! responses receive `g_i^T . P`. No `T x F x P` Jacobian is formed.
//!
//! At kinks of the clipped ramp the derivative of the ramp piece is used
//! (right-derivative at the ramp start, left-derivative at saturation).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::curves::{Axis, BandLayout, Interval};
use crate::grid::{Grid, MagnitudeSpectrogram, MelSpectrogram};
use crate::mel::MelFilterbank;
use crate::mixer::{
    bind_ramp_jacobian, check_region, constrain, constrain_unchecked, mix_from_curves, MixerParams, PairSpectra,
    RawParams, TrackCurves,
};
use crate::{Error, Result};

/// `(d prelu1 / d start, d prelu1 / d slope)` at one point.
#[inline]
pub fn prelu1_partials(v: f64, start: f64, slope: f64) -> (f64, f64) {
    let x = v - start;
    if x < 0.0 {
        return (0.0, 0.0);
    }
    if x > 1.0 {
        // inner clip active: value is min(slope, 1)
        return if slope < 1.0 { (0.0, 1.0) } else { (0.0, 0.0) };
    }
    if x * slope <= 1.0 {
        (-slope, x)
    } else {
        (0.0, 0.0)
    }
}

/// Per-point partial derivatives of `prelu1(axis, start, slope)`.
pub fn curve_jacobian(axis: &Axis, start: f64, slope: f64) -> Vec<(f64, f64)> {
    axis.values().iter().map(|&v| prelu1_partials(v, start, slope)).collect()
}

/// Spectral loss between the summed masked magnitude and a target.
#[derive(Debug, Clone)]
pub enum LossSpec {
    /// Mean squared error of `log(1 + magnitude)`.
    LogMag { target: MagnitudeSpectrogram },
    /// Mean squared error of log-mel energies.
    LogMel { target: MelSpectrogram, bank: MelFilterbank },
}

impl LossSpec {
    pub fn log_mag(target: MagnitudeSpectrogram) -> Self {
        LossSpec::LogMag { target }
    }

    /// Builds a log-mel loss; `target` is a magnitude spectrogram projected here.
    pub fn log_mel(target: &MagnitudeSpectrogram, bank: MelFilterbank) -> Result<Self> {
        let target = bank.log_mel(target)?;
        Ok(LossSpec::LogMel { target, bank })
    }

    fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        match self {
            LossSpec::LogMag { target } => target.ensure_shape("loss target", shape),
            LossSpec::LogMel { target, bank } => {
                target.ensure_shape("log-mel loss target", (shape.0, bank.n_mels()))?;
                if bank.bins() != shape.1 {
                    return Err(Error::ShapeMismatch {
                        what: "mel filterbank bins",
                        expected: (bank.n_mels(), shape.1),
                        found: (bank.n_mels(), bank.bins()),
                    });
                }
                Ok(())
            }
        }
    }

    /// Loss value and, if requested, `dL/dmix`.
    pub fn evaluate(&self, mix: &Grid, want_grad: bool) -> (f64, Option<Grid>) {
        match self {
            LossSpec::LogMag { target } => {
                let n = mix.data().len().max(1) as f64;
                let mut loss = 0.0;
                let mut grad = want_grad.then(|| Grid::zeros(mix.rows(), mix.cols()));
                for (i, (&m, &y)) in mix.data().iter().zip(target.data()).enumerate() {
                    let r = libm::log1p(m) - libm::log1p(y);
                    loss += r * r;
                    if let Some(g) = grad.as_mut() {
                        g.data_mut()[i] = 2.0 * r / ((1.0 + m) * n);
                    }
                }
                (loss / n, grad)
            }
            LossSpec::LogMel { target, bank } => {
                let (frames, bins) = mix.shape();
                let n_mels = bank.n_mels();
                let n = (frames * n_mels).max(1) as f64;
                let mut loss = 0.0;
                let mut grad = want_grad.then(|| Grid::zeros(frames, bins));
                let mut power = vec![0.0; bins];
                let mut energy = vec![0.0; n_mels];
                let mut dmel = vec![0.0; n_mels];
                let mut dpow = vec![0.0; bins];
                for t in 0..frames {
                    for (p, &m) in power.iter_mut().zip(mix.row(t)) {
                        *p = m * m;
                    }
                    bank.project(&power, &mut energy);
                    for (m, e) in energy.iter().enumerate() {
                        let e = e + bank.log_floor();
                        let r = libm::log(e) - target.get(t, m);
                        loss += r * r;
                        dmel[m] = 2.0 * r / (n * e);
                    }
                    if let Some(g) = grad.as_mut() {
                        dpow.iter_mut().for_each(|x| *x = 0.0);
                        bank.project_adjoint(&dmel, &mut dpow);
                        for ((dst, &dp), &m) in g.row_mut(t).iter_mut().zip(&dpow).zip(mix.row(t)) {
                            *dst = 2.0 * m * dp;
                        }
                    }
                }
                (loss / n, grad)
            }
        }
    }
}

/// Gradient of a scalar function of the mixed magnitude with respect to the
/// raw parameters, given `dmix = dL/dmix`.
pub fn mix_backward(
    raw: &RawParams,
    pair: &PairSpectra,
    region: Interval,
    layout: &BandLayout,
    dmix: &Grid,
) -> Result<Vec<f64>> {
    dmix.ensure_shape("mix gradient", pair.shape())?;
    let params = constrain(raw, region, layout)?;
    Ok(mix_backward_unchecked(raw, &params, pair, region, layout, dmix))
}

pub(crate) fn mix_backward_unchecked(
    raw: &RawParams,
    params: &MixerParams,
    pair: &PairSpectra,
    region: Interval,
    layout: &BandLayout,
    dmix: &Grid,
) -> Vec<f64> {
    let pl = raw.layout();
    let u = raw.values();
    let mut grad = vec![0.0; pl.len()];
    let tracks = [(&params.track1, &pair.track1, true), (&params.track2, &pair.track2, false)];
    for (t, (tp, mag, outgoing)) in tracks.into_iter().enumerate() {
        let curves = TrackCurves::evaluate(tp, outgoing, &pair.time, &pair.freq);
        let k = curves.gains.len();
        let (frames, bins) = pair.shape();
        let mut dgain = vec![vec![0.0; frames]; k];
        let mut dband = vec![vec![0.0; bins]; k];
        for r in 0..frames {
            let drow = dmix.row(r);
            let arow = mag.row(r);
            for i in 0..k {
                let h = &curves.bands[i];
                let gi = curves.gains[i][r];
                let db = &mut dband[i];
                let mut acc = 0.0;
                for f in 0..bins {
                    let p = drow[f] * arow[f];
                    acc += p * h[f];
                    db[f] += p * gi;
                }
                dgain[i][r] = acc;
            }
        }

        let sign = if outgoing { -1.0 } else { 1.0 };
        for (i, fade) in tp.fades.iter().enumerate() {
            let (mut ds, mut dd) = (0.0, 0.0);
            for (&v, &dg) in pair.time.values().iter().zip(&dgain[i]) {
                let (ps, pd) = prelu1_partials(v, fade.start, fade.slope);
                ds += dg * sign * ps;
                dd += dg * sign * pd;
            }
            let j = pl.fade_index(t, i);
            let (js, jds, jdd) = bind_ramp_jacobian(u[j], u[j + 1], region);
            grad[j] += ds * js + dd * jds;
            grad[j + 1] += dd * jdd;
        }

        for (b, (filter, bound)) in tp.filters.iter().zip(layout.boundaries()).enumerate() {
            let (mut ds, mut dd) = (0.0, 0.0);
            for (f, &v) in pair.freq.values().iter().enumerate() {
                // lowpass b enters band b with + and band b+1 with -
                let dlow = dband[b][f] - dband[b + 1][f];
                let (ps, pd) = prelu1_partials(v, filter.start, filter.slope);
                ds -= dlow * ps;
                dd -= dlow * pd;
            }
            let j = pl.filter_index(t, b);
            let (js, jds, jdd) = bind_ramp_jacobian(u[j], u[j + 1], *bound);
            grad[j] += ds * js + dd * jds;
            grad[j + 1] += dd * jdd;
        }
    }
    grad
}

/// Inverse-rendering objective over one prepared pair.
#[derive(Debug, Clone, Copy)]
pub struct MixProblem<'a> {
    pub pair: &'a PairSpectra,
    pub region: Interval,
    pub layout: &'a BandLayout,
    pub loss: &'a LossSpec,
}

impl<'a> MixProblem<'a> {
    pub fn new(pair: &'a PairSpectra, region: Interval, layout: &'a BandLayout, loss: &'a LossSpec) -> Result<Self> {
        check_region(region)?;
        loss.check_shape(pair.shape())?;
        Ok(MixProblem { pair, region, layout, loss })
    }

    pub fn loss(&self, raw: &RawParams) -> Result<f64> {
        let params = constrain(raw, self.region, self.layout)?;
        Ok(self.loss_of(&params))
    }

    fn loss_of(&self, params: &MixerParams) -> f64 {
        let c1 = TrackCurves::evaluate(&params.track1, true, &self.pair.time, &self.pair.freq);
        let c2 = TrackCurves::evaluate(&params.track2, false, &self.pair.time, &self.pair.freq);
        self.loss.evaluate(&mix_from_curves(&c1, &c2, self.pair), false).0
    }

    /// Loss at raw coordinates that may lie slightly outside `[0, 1]`.
    pub(crate) fn loss_unchecked(&self, values: &[f64], like: &RawParams) -> f64 {
        let raw = RawParams::from_unchecked(like.layout(), values.to_vec());
        self.loss_of(&constrain_unchecked(&raw, self.region, self.layout))
    }

    pub fn loss_and_grad(&self, raw: &RawParams) -> Result<(f64, Vec<f64>)> {
        let params = constrain(raw, self.region, self.layout)?;
        let c1 = TrackCurves::evaluate(&params.track1, true, &self.pair.time, &self.pair.freq);
        let c2 = TrackCurves::evaluate(&params.track2, false, &self.pair.time, &self.pair.freq);
        let mix = mix_from_curves(&c1, &c2, self.pair);
        let (loss, dmix) = self.loss.evaluate(&mix, true);
        let dmix = dmix.expect("gradient requested");
        let grad = mix_backward_unchecked(raw, &params, self.pair, self.region, self.layout, &dmix);
        Ok((loss, grad))
    }
}

/// One raw coordinate in a [`GradReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradEntry {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    /// The finite-difference stencil crosses a clip boundary of some ramp.
    pub kink_adjacent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub eps: f64,
    pub entries: Vec<GradEntry>,
    /// Over coordinates that are not kink-adjacent.
    pub max_rel_error: f64,
    pub p99_rel_error: f64,
}

impl GradReport {
    pub fn checked(&self) -> impl Iterator<Item = &GradEntry> {
        self.entries.iter().filter(|e| !e.kink_adjacent)
    }

    pub fn flagged_count(&self) -> usize {
        self.entries.iter().filter(|e| e.kink_adjacent).count()
    }

    /// Fraction of non-flagged coordinates with relative error at most `tol`.
    /// One when nothing is checked.
    pub fn pass_fraction(&self, tol: f64) -> f64 {
        let total = self.checked().count();
        if total == 0 {
            return 1.0;
        }
        self.checked().filter(|e| e.rel_error <= tol).count() as f64 / total as f64
    }
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(f64::max(a.abs(), b.abs()), 1e-8)
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Piece {
    Before,
    Start,
    Ramp,
    End,
    Saturated,
}

fn piece(v: f64, start: f64, slope: f64) -> Piece {
    let x = v - start;
    if x < 0.0 {
        Piece::Before
    } else if x == 0.0 {
        Piece::Start
    } else {
        let z = f64::min(x, 1.0) * slope;
        if z < 1.0 {
            Piece::Ramp
        } else if z == 1.0 {
            Piece::End
        } else {
            Piece::Saturated
        }
    }
}

fn pieces(params: &MixerParams, time: &Axis, freq: &Axis) -> Vec<Piece> {
    let mut out = Vec::new();
    for tp in [&params.track1, &params.track2] {
        for f in &tp.fades {
            out.extend(time.values().iter().map(|&v| piece(v, f.start, f.slope)));
        }
        for f in &tp.filters {
            out.extend(freq.values().iter().map(|&v| piece(v, f.start, f.slope)));
        }
    }
    out
}

/// Central differences against the analytic gradient of `problem`.
pub fn finite_diff_check(problem: &MixProblem<'_>, raw: &RawParams, eps: f64) -> Result<GradReport> {
    let (_, analytic) = problem.loss_and_grad(raw)?;
    check_gradient(problem, raw, &analytic, eps)
}

/// Central differences against a caller-provided gradient. Useful to make
/// sure the harness itself catches a wrong gradient.
pub fn check_gradient(problem: &MixProblem<'_>, raw: &RawParams, analytic: &[f64], eps: f64) -> Result<GradReport> {
    if !(1e-8..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!("finite-difference eps must be in [1e-8, 1e-3], got {eps}")));
    }
    if analytic.len() != raw.len() {
        return Err(Error::InvalidArgument(format!(
            "gradient has {} entries, parameters have {}",
            analytic.len(),
            raw.len()
        )));
    }
    constrain(raw, problem.region, problem.layout)?;
    let (time, freq) = (&problem.pair.time, &problem.pair.freq);
    let centre_params = constrain_unchecked(raw, problem.region, problem.layout);
    let centre = pieces(&centre_params, time, freq);

    let mut entries = Vec::with_capacity(raw.len());
    let mut values = raw.values().to_vec();
    for (j, &a) in analytic.iter().enumerate() {
        let base = values[j];
        values[j] = base + eps;
        let up_raw = RawParams::from_unchecked(raw.layout(), values.clone());
        let up = problem.loss_unchecked(&values, raw);
        values[j] = base - eps;
        let down_raw = RawParams::from_unchecked(raw.layout(), values.clone());
        let down = problem.loss_unchecked(&values, raw);
        values[j] = base;

        let numeric = (up - down) / (2.0 * eps);
        let up_p = pieces(&constrain_unchecked(&up_raw, problem.region, problem.layout), time, freq);
        let down_p = pieces(&constrain_unchecked(&down_raw, problem.region, problem.layout), time, freq);
        let moved = centre.iter().zip(&up_p).zip(&down_p).any(|((c, u), d)| c != u || c != d);
        entries.push(GradEntry {
            index: j,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
            kink_adjacent: moved,
        });
    }

    let mut errs: Vec<f64> = entries.iter().filter(|e| !e.kink_adjacent).map(|e| e.rel_error).collect();
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let max_rel_error = errs.last().copied().unwrap_or(0.0);
    let p99_rel_error = if errs.is_empty() {
        0.0
    } else {
        let idx = libm::ceil(0.99 * errs.len() as f64) as usize;
        errs[idx.saturating_sub(1).min(errs.len() - 1)]
    };
    Ok(GradReport { eps, entries, max_rel_error, p99_rel_error })
}
