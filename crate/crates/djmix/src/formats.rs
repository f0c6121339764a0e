//! JSON/CSV file formats and atomic file output.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use djmix_core::cueing::{BeatGrid, CuePoints, Key, Mode};
use djmix_core::curves::{BandLayout, FadeParams};
use djmix_core::mixer::{MixerParams, ParamLayout, TrackParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::audio::SAMPLE_RATE;
use crate::error::{Error, Result};

/// Run `fill` on a temporary file next to `path`, then rename it into place.
/// On failure nothing is left at `path`.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut File) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    fill(tmp.as_file_mut()).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json { path: path.into(), source })?;
    text.push('\n');
    write_atomic(path, |f| f.write_all(text.as_bytes()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampJson {
    pub s: f64,
    pub delta: f64,
}

impl From<FadeParams> for RampJson {
    fn from(p: FadeParams) -> Self {
        RampJson { s: p.start, delta: p.slope }
    }
}

impl From<RampJson> for FadeParams {
    fn from(r: RampJson) -> Self {
        FadeParams::new(r.s, r.delta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackJson {
    pub fades: Vec<RampJson>,
    pub filters: Vec<RampJson>,
}

impl From<&TrackParams> for TrackJson {
    fn from(t: &TrackParams) -> Self {
        TrackJson {
            fades: t.fades.iter().map(|&f| f.into()).collect(),
            filters: t.filters.iter().map(|&f| f.into()).collect(),
        }
    }
}

impl From<&TrackJson> for TrackParams {
    fn from(t: &TrackJson) -> Self {
        TrackParams {
            fades: t.fades.iter().map(|&f| f.into()).collect(),
            filters: t.filters.iter().map(|&f| f.into()).collect(),
        }
    }
}

/// Mixer parameters file. Fade positions are normalized to the analysis
/// window, filter positions to the Nyquist frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub k: usize,
    pub band_edges_hz: Vec<f64>,
    pub track1: TrackJson,
    pub track2: TrackJson,
    /// Set when the parameters were produced with the last two fades tied.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tie_last_fade: bool,
}

impl ParamsFile {
    pub fn new(params: &MixerParams, band_edges_hz: &[f64], tie_last_fade: bool) -> Self {
        ParamsFile {
            k: params.k(),
            band_edges_hz: band_edges_hz.to_vec(),
            track1: (&params.track1).into(),
            track2: (&params.track2).into(),
            tie_last_fade,
        }
    }

    pub fn layout(&self) -> Result<BandLayout> {
        Ok(BandLayout::from_hz(self.k, &self.band_edges_hz, SAMPLE_RATE as f64)?)
    }

    pub fn params(&self) -> MixerParams {
        MixerParams { track1: (&self.track1).into(), track2: (&self.track2).into() }
    }

    pub fn param_layout(&self) -> ParamLayout {
        ParamLayout::new(self.k, self.tie_last_fade)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyJson {
    pub tonic: String,
    pub mode: String,
}

fn default_beats_per_bar() -> u32 {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub bpm: f64,
    #[serde(default = "default_beats_per_bar")]
    pub beats_per_bar: u32,
    pub downbeats_sec: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<KeyJson>,
}

impl GridFile {
    pub fn to_grid(&self) -> Result<BeatGrid> {
        let key = match &self.key {
            Some(k) => {
                let mode: Mode = k.mode.parse()?;
                Some(Key::new(&k.tonic, mode)?)
            }
            None => None,
        };
        Ok(BeatGrid::new(self.downbeats_sec.clone(), self.bpm, self.beats_per_bar, key)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CueFile {
    pub c_in_sec: f64,
    pub c_out_sec: f64,
    /// Timeline position of the incoming track's first sample; defaults to `c_in_sec`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_offset_sec: Option<f64>,
}

impl CueFile {
    pub fn to_cues(&self) -> Result<CuePoints> {
        Ok(CuePoints::new(self.c_in_sec, self.c_out_sec, self.b_offset_sec.unwrap_or(self.c_in_sec))?)
    }
}

impl From<&CuePoints> for CueFile {
    fn from(c: &CuePoints) -> Self {
        CueFile { c_in_sec: c.c_in, c_out_sec: c.c_out, b_offset_sec: Some(c.b_offset) }
    }
}

/// Annotation for a recorded DJ mix: the transition boundary inside the mix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixAnnotation {
    pub boundary_sec: f64,
    /// Transition length centred on the boundary; defaults to 16 s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_sec: Option<f64>,
}

/// One row of the adversarial training history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub step: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub mean_d_fake: f64,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("step,d_loss,g_loss,mean_D_fake\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.step, r.d_loss, r.g_loss, r.mean_d_fake));
    }
    out
}

pub fn write_history_csv(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let text = history_csv(rows);
    write_atomic(path, |f| f.write_all(text.as_bytes()))
}
