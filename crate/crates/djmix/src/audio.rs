//! Multichannel clips, WAV IO and sample-rate conversion.

use std::f64::consts::PI;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};

/// Working sample rate of the whole pipeline.
pub const SAMPLE_RATE: u32 = 44_100;

/// Real-valued samples per channel, nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Invalid("a clip needs at least one channel".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Invalid("sample rate must be positive".into()));
        }
        let len = channels[0].len();
        if channels.iter().any(|c| c.len() != len) {
            return Err(Error::Invalid("all channels must have the same length".into()));
        }
        Ok(AudioClip { channels, sample_rate })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn silence(len: usize, n_channels: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![vec![0.0; len]; n_channels.max(1)], sample_rate)
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_sec(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    /// Mean of all channels.
    pub fn to_mono(&self) -> Vec<f64> {
        if self.channels.len() == 1 {
            return self.channels[0].clone();
        }
        let scale = 1.0 / self.channels.len() as f64;
        (0..self.len()).map(|n| self.channels.iter().map(|c| c[n]).sum::<f64>() * scale).collect()
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn peak(&self) -> f64 {
        self.channels.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Pcm16,
    Pcm24,
    Float32,
}

impl std::str::FromStr for WavEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pcm16" => Ok(WavEncoding::Pcm16),
            "pcm24" => Ok(WavEncoding::Pcm24),
            "float32" | "f32" => Ok(WavEncoding::Float32),
            other => Err(Error::Invalid(format!("unknown WAV encoding '{other}' (pcm16, pcm24, float32)"))),
        }
    }
}

/// Decodes PCM16, PCM24 and float32 WAV files. Integer samples are scaled by
/// `2^-(bits-1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::Unsupported => {
            Error::UnsupportedEncoding { path: path.into(), detail: "codec tag is not PCM or IEEE float".into() }
        }
        hound::Error::IoError(source) => Error::io(path, source),
        source => Error::Wav { path: path.into(), source },
    })?;
    let spec = reader.spec();
    let n_channels = spec.channels as usize;
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16 | 24) => {
            let scale = 1.0 / (1u32 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|source| Error::Wav { path: path.into(), source })?
        }
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|source| Error::Wav { path: path.into(), source })?,
        (format, bits) => {
            return Err(Error::UnsupportedEncoding {
                path: path.into(),
                detail: format!("{bits}-bit {format:?} samples (expected PCM16, PCM24 or float32)"),
            })
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_channels); n_channels];
    for frame in interleaved.chunks_exact(n_channels) {
        for (c, &x) in channels.iter_mut().zip(frame) {
            c.push(x);
        }
    }
    AudioClip::new(channels, spec.sample_rate)
}

/// Writes atomically: the target only appears once fully written.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let (bits, format) = match encoding {
        WavEncoding::Pcm16 => (16, hound::SampleFormat::Int),
        WavEncoding::Pcm24 => (24, hound::SampleFormat::Int),
        WavEncoding::Float32 => (32, hound::SampleFormat::Float),
    };
    let spec = hound::WavSpec {
        channels: clip.n_channels() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };
    crate::formats::write_atomic(path, |file| {
        let wav_err = |e: hound::Error| match e {
            hound::Error::IoError(io) => io,
            other => std::io::Error::other(other),
        };
        let mut writer = hound::WavWriter::new(BufWriter::new(file), spec).map_err(wav_err)?;
        let full = (1i64 << (bits - 1)) as f64;
        for n in 0..clip.len() {
            for c in clip.channels() {
                let x = c[n];
                match encoding {
                    WavEncoding::Float32 => writer.write_sample(x as f32),
                    _ => writer.write_sample((x * full).round().clamp(-full, full - 1.0) as i32),
                }
                .map_err(wav_err)?;
            }
        }
        writer.finalize().map_err(wav_err)
    })
}

const KAISER_BETA: f64 = 8.0;
/// Kernel support in zero crossings of the (possibly narrowed) sinc.
const TAPS: usize = 32;
const PHASES: usize = 256;

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let (mut sum, mut term) = (1.0, 1.0);
    let q = 0.25 * x * x;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc sampled at `PHASES` points per unit on `[0, TAPS/2]`.
fn kernel_table() -> Vec<f64> {
    let half = (TAPS / 2) as f64;
    let norm = bessel_i0(KAISER_BETA);
    (0..=TAPS / 2 * PHASES + 1)
        .map(|i| {
            let u = i as f64 / PHASES as f64;
            if u >= half {
                return 0.0;
            }
            let sinc = if u == 0.0 { 1.0 } else { (PI * u).sin() / (PI * u) };
            let r = u / half;
            sinc * bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / norm
        })
        .collect()
}

fn kernel(table: &[f64], u: f64) -> f64 {
    let pos = u.abs() * PHASES as f64;
    let i = pos as usize;
    if i + 1 >= table.len() {
        return 0.0;
    }
    let frac = pos - i as f64;
    table[i] * (1.0 - frac) + table[i + 1] * frac
}

/// Band-limited conversion to `target_rate`. Output length is
/// `round(len * target / source)`.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    if target_rate == 0 {
        return Err(Error::Invalid("target sample rate must be positive".into()));
    }
    let src = clip.sample_rate();
    if src == target_rate {
        return Ok(clip.clone());
    }
    let ratio = target_rate as f64 / src as f64;
    let out_len = (clip.len() as f64 * ratio).round() as usize;
    // cutoff relative to the input Nyquist; below one when decimating
    let fc = ratio.min(1.0);
    let reach = (TAPS / 2) as f64 / fc;
    let table = kernel_table();
    let channels = clip
        .channels()
        .iter()
        .map(|x| {
            (0..out_len)
                .map(|n| {
                    let t = n as f64 / ratio;
                    let lo = ((t - reach).ceil().max(0.0)) as usize;
                    let hi = ((t + reach).floor() as usize).min(x.len().saturating_sub(1));
                    (lo..=hi.max(lo))
                        .filter(|&m| m < x.len())
                        .map(|m| x[m] * fc * kernel(&table, (t - m as f64) * fc))
                        .sum()
                })
                .collect()
        })
        .collect();
    AudioClip::new(channels, target_rate)
}

/// Mono downmix at the working rate.
pub fn to_working_mono(clip: &AudioClip) -> Result<Vec<f64>> {
    Ok(resample(clip, SAMPLE_RATE)?.to_mono())
}
