//! Short-time Fourier analysis and weighted overlap-add synthesis.
//!
//! Frames start at sample 0 without centering; a trailing partial frame is
//! dropped. Synthesis divides by the summed squared window (floored at
//! `1e-8`), so `istft(stft(x))` reproduces `x` wherever frames overlap.

use std::f64::consts::PI;
use std::sync::Arc;

use djmix_core::curves::Axis;
use djmix_core::Grid;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

const WOLA_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKind {
    #[default]
    Hamming,
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Hamming => "hamming",
            WindowKind::Hann => "hann",
            WindowKind::Rectangular => "rectangular",
        }
    }
}

impl std::str::FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hamming" => Ok(WindowKind::Hamming),
            "hann" | "hanning" => Ok(WindowKind::Hann),
            "rectangular" | "boxcar" => Ok(WindowKind::Rectangular),
            other => Err(Error::Invalid(format!("unknown window '{other}'"))),
        }
    }
}

/// Periodic window of length `n`.
pub fn window(kind: WindowKind, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let phase = 2.0 * PI * i as f64 / n as f64;
            match kind {
                WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
                WindowKind::Hann => 0.5 - 0.5 * phase.cos(),
                WindowKind::Rectangular => 1.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectroConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub sample_rate: f64,
}

impl Default for SpectroConfig {
    fn default() -> Self {
        SpectroConfig { fft_size: 2048, hop: 512, window: WindowKind::Hamming, sample_rate: 44_100.0 }
    }
}

impl SpectroConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(Error::Invalid(format!("fft_size must be a power of two, got {}", self.fft_size)));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(Error::Invalid(format!("hop must be in 1..={}, got {}", self.fft_size, self.hop)));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::Invalid("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// `floor((len - fft_size) / hop) + 1`.
    pub fn frame_count(&self, len: usize) -> Result<usize> {
        if len < self.fft_size {
            return Err(Error::Invalid(format!(
                "signal of {len} samples is shorter than one {}-sample frame",
                self.fft_size
            )));
        }
        Ok((len - self.fft_size) / self.hop + 1)
    }

    /// Frame centres normalized by the signal length, the time axis masks are evaluated on.
    pub fn frame_axis(&self, frames: usize, len: usize) -> Axis {
        let n = len as f64;
        let values = (0..frames).map(|t| (t * self.hop) as f64 / n + self.fft_size as f64 / (2.0 * n)).collect();
        Axis::from_values(values).expect("increasing frame centres")
    }

    pub fn frame_seconds(&self) -> f64 {
        self.hop as f64 / self.sample_rate
    }
}

/// `frames x bins` complex grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn zeros(frames: usize, bins: usize) -> Self {
        ComplexSpectrogram { frames, bins, data: vec![Complex64::new(0.0, 0.0); frames * bins] }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn get(&self, t: usize, f: usize) -> Complex64 {
        self.data[t * self.bins + f]
    }

    pub fn row(&self, t: usize) -> &[Complex64] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn magnitude(&self) -> Grid {
        Grid::from_vec(self.frames, self.bins, self.data.iter().map(|c| c.norm()).collect()).expect("shape")
    }

    /// Spectrogram with magnitude `mag` and the phases of `self`.
    pub fn with_magnitude(&self, mag: &Grid) -> Result<Self> {
        mag.ensure_shape("magnitude", (self.frames, self.bins))?;
        let data = self
            .data
            .iter()
            .zip(mag.data())
            .map(|(c, &m)| {
                let n = c.norm();
                if n > 0.0 {
                    c * (m / n)
                } else {
                    Complex64::new(m, 0.0)
                }
            })
            .collect();
        Ok(ComplexSpectrogram { frames: self.frames, bins: self.bins, data })
    }

    /// Entrywise product with a real mask.
    pub fn masked(&self, mask: &Grid) -> Result<Self> {
        mask.ensure_shape("mask", (self.frames, self.bins))?;
        let data = self.data.iter().zip(mask.data()).map(|(c, &m)| c * m).collect();
        Ok(ComplexSpectrogram { frames: self.frames, bins: self.bins, data })
    }
}

/// Reusable analysis/synthesis plan for one configuration.
pub struct Stft {
    cfg: SpectroConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl Stft {
    pub fn new(cfg: SpectroConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Stft {
            cfg,
            window: window(cfg.window, cfg.fft_size),
            forward: planner.plan_fft_forward(cfg.fft_size),
            inverse: planner.plan_fft_inverse(cfg.fft_size),
        })
    }

    pub fn config(&self) -> &SpectroConfig {
        &self.cfg
    }

    pub fn analyze(&self, x: &[f64]) -> Result<ComplexSpectrogram> {
        let (n, hop, bins) = (self.cfg.fft_size, self.cfg.hop, self.cfg.bins());
        let frames = self.cfg.frame_count(x.len())?;
        let mut out = ComplexSpectrogram::zeros(frames, bins);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for t in 0..frames {
            let seg = &x[t * hop..t * hop + n];
            for ((b, &s), &w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex64::new(s * w, 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            out.data[t * bins..(t + 1) * bins].copy_from_slice(&buf[..bins]);
        }
        Ok(out)
    }

    /// Overlap-add resynthesis of `(frames - 1) * hop + fft_size` samples.
    pub fn synthesize(&self, spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
        let (n, hop, bins) = (self.cfg.fft_size, self.cfg.hop, self.cfg.bins());
        if spec.bins != bins {
            return Err(Error::Invalid(format!("spectrogram has {} bins, configuration expects {bins}", spec.bins)));
        }
        if spec.frames == 0 {
            return Ok(Vec::new());
        }
        let len = (spec.frames - 1) * hop + n;
        let mut y = vec![0.0; len];
        let mut norm = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n as f64;
        for t in 0..spec.frames {
            let row = spec.row(t);
            buf[..bins].copy_from_slice(row);
            // real signal: imaginary parts of DC and Nyquist carry no information
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            for f in 1..n / 2 {
                buf[n - f] = row[f].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let off = t * hop;
            for (i, (&w, b)) in self.window.iter().zip(&buf).enumerate() {
                y[off + i] += w * b.re * scale;
                norm[off + i] += w * w;
            }
        }
        for (s, &d) in y.iter_mut().zip(&norm) {
            *s /= d.max(WOLA_FLOOR);
        }
        Ok(y)
    }

    /// Resynthesis zero-padded or truncated to `len` samples.
    pub fn synthesize_len(&self, spec: &ComplexSpectrogram, len: usize) -> Result<Vec<f64>> {
        let mut y = self.synthesize(spec)?;
        y.resize(len, 0.0);
        Ok(y)
    }
}

pub fn stft(x: &[f64], cfg: &SpectroConfig) -> Result<ComplexSpectrogram> {
    Stft::new(*cfg)?.analyze(x)
}

pub fn istft(spec: &ComplexSpectrogram, cfg: &SpectroConfig) -> Result<Vec<f64>> {
    Stft::new(*cfg)?.synthesize(spec)
}

/// Signal-to-noise ratio of `estimate` against `reference` in dB.
pub fn snr_db(reference: &[f64], estimate: &[f64]) -> f64 {
    let (mut sig, mut err) = (0.0, 0.0);
    for (r, e) in reference.iter().zip(estimate) {
        sig += r * r;
        err += (r - e) * (r - e);
    }
    10.0 * (sig / err.max(f64::MIN_POSITIVE)).log10()
}
