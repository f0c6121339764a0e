//! Triangular mel filterbank (HTK mel scale) and log-mel projection.

use alloc::format;
use alloc::vec::Vec;

use crate::grid::{Grid, MagnitudeSpectrogram, MelSpectrogram};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub fmin: f64,
    /// `None` means Nyquist.
    pub fmax: Option<f64>,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig { n_mels: 128, fmin: 0.0, fmax: None, log_floor: 1e-10 }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * libm::log10(1.0 + hz / 700.0)
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0)
}

/// One triangle stored sparsely from its first nonzero bin.
#[derive(Debug, Clone, PartialEq)]
struct Triangle {
    first_bin: usize,
    weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    bins: usize,
    log_floor: f64,
    rows: Vec<Triangle>,
}

impl MelFilterbank {
    /// Filterbank over `bins = fft_size / 2 + 1` linear-frequency bins spanning 0..Nyquist.
    pub fn new(cfg: &MelConfig, bins: usize, sample_rate: f64) -> Result<Self> {
        let nyquist = sample_rate / 2.0;
        let fmax = cfg.fmax.unwrap_or(nyquist);
        if cfg.n_mels == 0 {
            return Err(Error::InvalidArgument("n_mels must be at least 1".into()));
        }
        if !(cfg.fmin >= 0.0 && cfg.fmin < fmax && fmax <= nyquist) {
            return Err(Error::InvalidArgument(format!(
                "mel range requires 0 <= fmin < fmax <= sample_rate/2, got {}..{fmax}",
                cfg.fmin
            )));
        }
        if !(cfg.log_floor > 0.0) {
            return Err(Error::InvalidArgument("log_floor must be positive".into()));
        }
        if bins < 2 {
            return Err(Error::InvalidArgument("need at least two frequency bins".into()));
        }
        let (mlo, mhi) = (hz_to_mel(cfg.fmin), hz_to_mel(fmax));
        let n = cfg.n_mels;
        let points: Vec<f64> = (0..n + 2).map(|i| mel_to_hz(mlo + (mhi - mlo) * i as f64 / (n + 1) as f64)).collect();
        let bin_hz = nyquist / (bins - 1) as f64;
        let mut rows = Vec::with_capacity(n);
        for m in 0..n {
            let (lo, centre, hi) = (points[m], points[m + 1], points[m + 2]);
            let mut first_bin = None;
            let mut weights = Vec::new();
            for b in 0..bins {
                let hz = b as f64 * bin_hz;
                let w = f64::max(0.0, f64::min((hz - lo) / (centre - lo), (hi - hz) / (hi - centre)));
                if w > 0.0 {
                    if first_bin.is_none() {
                        first_bin = Some(b);
                    }
                    weights.push(w);
                } else if first_bin.is_some() {
                    break;
                }
            }
            match first_bin {
                Some(first_bin) => rows.push(Triangle { first_bin, weights }),
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "mel band {m} ({lo:.1}-{hi:.1} Hz) covers no frequency bin; use fewer mel bands or a larger FFT"
                    )))
                }
            }
        }
        Ok(MelFilterbank { bins, log_floor: cfg.log_floor, rows })
    }

    pub fn n_mels(&self) -> usize {
        self.rows.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn log_floor(&self) -> f64 {
        self.log_floor
    }

    /// Dense `n_mels x bins` weight matrix.
    pub fn dense(&self) -> Grid {
        let mut g = Grid::zeros(self.rows.len(), self.bins);
        for (m, tri) in self.rows.iter().enumerate() {
            for (j, &w) in tri.weights.iter().enumerate() {
                g.set(m, tri.first_bin + j, w);
            }
        }
        g
    }

    /// Filterbank energies of one power frame.
    pub(crate) fn project(&self, power: &[f64], out: &mut [f64]) {
        for (dst, tri) in out.iter_mut().zip(&self.rows) {
            let span = &power[tri.first_bin..tri.first_bin + tri.weights.len()];
            *dst = tri.weights.iter().zip(span).map(|(w, p)| w * p).sum();
        }
    }

    /// Adjoint of [`Self::project`]: accumulates `W^T g` into `out`.
    pub(crate) fn project_adjoint(&self, g: &[f64], out: &mut [f64]) {
        for (&gm, tri) in g.iter().zip(&self.rows) {
            let span = &mut out[tri.first_bin..tri.first_bin + tri.weights.len()];
            for (o, w) in span.iter_mut().zip(&tri.weights) {
                *o += gm * w;
            }
        }
    }

    /// `log(W * |X|^2 + floor)` per frame.
    pub fn log_mel(&self, mag: &MagnitudeSpectrogram) -> Result<MelSpectrogram> {
        if mag.cols() != self.bins {
            return Err(Error::ShapeMismatch {
                what: "magnitude spectrogram for mel projection",
                expected: (mag.rows(), self.bins),
                found: mag.shape(),
            });
        }
        let mut out = Grid::zeros(mag.rows(), self.rows.len());
        let mut power = alloc::vec![0.0; self.bins];
        for t in 0..mag.rows() {
            for (p, &m) in power.iter_mut().zip(mag.row(t)) {
                *p = m * m;
            }
            let row = out.row_mut(t);
            self.project(&power, row);
            for e in row.iter_mut() {
                *e = libm::log(*e + self.log_floor);
            }
        }
        Ok(out)
    }
}
