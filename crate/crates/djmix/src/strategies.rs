//! Non-learned baselines: plain sum, linear crossfade and rule presets.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use djmix_core::curves::{BandLayout, FadeParams, Interval};
use djmix_core::mixer::{MixerParams, TrackParams};

use crate::error::{Error, Result};
use crate::formats::{read_json, ParamsFile, TrackJson};
use crate::prepare::PreparedPair;
use crate::render::{finish, render, RenderConfig, Rendered};

const BUILTIN_PRESETS: &str = include_str!("../presets/rules.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransitionType {
    VocalToVocal,
    NonVocalToVocal,
    VocalToNonVocal,
    NonVocalToNonVocal,
}

impl TransitionType {
    pub const ALL: [TransitionType; 4] = [
        TransitionType::VocalToVocal,
        TransitionType::NonVocalToVocal,
        TransitionType::VocalToNonVocal,
        TransitionType::NonVocalToNonVocal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TransitionType::VocalToVocal => "V-V",
            TransitionType::NonVocalToVocal => "NV-V",
            TransitionType::VocalToNonVocal => "V-NV",
            TransitionType::NonVocalToNonVocal => "NV-NV",
        }
    }
}

impl fmt::Display for TransitionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TransitionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('_', "-");
        TransitionType::ALL
            .into_iter()
            .find(|t| t.label() == norm)
            .ok_or_else(|| Error::Invalid(format!("unknown transition type '{s}' (V-V, NV-V, V-NV, NV-NV)")))
    }
}

/// Preset table: mixer-params entries whose fade positions are relative to
/// the transition region and whose filter positions are relative to each
/// band boundary. A relative ramp `(s, delta)` binds to `(lo + s w, delta / w)`
/// on an interval of width `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct RulePresets {
    entries: BTreeMap<TransitionType, ParamsFile>,
}

impl RulePresets {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PRESETS).expect("bundled preset table is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, ParamsFile> =
            serde_json::from_str(text).map_err(|source| Error::Json { path: "<presets>".into(), source })?;
        Self::from_map(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_map(read_json(path)?)
    }

    fn from_map(raw: BTreeMap<String, ParamsFile>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (name, entry) in raw {
            let t: TransitionType = name.parse()?;
            entry.layout()?;
            entries.insert(t, entry);
        }
        Ok(RulePresets { entries })
    }

    pub fn get(&self, t: TransitionType) -> Result<&ParamsFile> {
        self.entries.get(&t).ok_or_else(|| Error::Invalid(format!("no preset for transition type {t}")))
    }

    /// Absolute parameters for `t` on a region, plus the preset's band layout.
    pub fn bind(&self, t: TransitionType, region: Interval) -> Result<(MixerParams, BandLayout)> {
        let entry = self.get(t)?;
        let layout = entry.layout()?;
        let track = |tj: &TrackJson| -> TrackParams {
            let rel = |r: &crate::formats::RampJson, on: Interval| {
                FadeParams::new(on.lo + r.s * on.width(), r.delta / on.width())
            };
            TrackParams {
                fades: tj.fades.iter().map(|r| rel(r, region)).collect(),
                filters: tj.filters.iter().zip(layout.boundaries()).map(|(r, &b)| rel(r, b)).collect(),
            }
        };
        let params = MixerParams { track1: track(&entry.track1), track2: track(&entry.track2) };
        params.validate(region, &layout)?;
        Ok((params, layout))
    }
}

/// Samplewise `x1 + x2`.
pub fn sum_mix(pair: &PreparedPair) -> Result<Rendered> {
    let channels = pair
        .x1
        .channels()
        .iter()
        .zip(pair.x2.channels())
        .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect())
        .collect();
    finish(channels, pair.sample_rate())
}

/// Gain of the incoming track at window sample `n`: 0 before `C_in`, 1 after
/// `C_out`, linear in between.
pub fn linear_gain(pair: &PreparedPair, n: usize) -> f64 {
    let (cin, cout) = pair.region_samples();
    ((n as f64 - cin as f64) / (cout - cin) as f64).clamp(0.0, 1.0)
}

/// Time-domain linear crossfade over `[C_in, C_out]`.
pub fn linear_mix(pair: &PreparedPair) -> Result<Rendered> {
    let gains: Vec<f64> = (0..pair.len()).map(|n| linear_gain(pair, n)).collect();
    let channels = pair
        .x1
        .channels()
        .iter()
        .zip(pair.x2.channels())
        .map(|(a, b)| a.iter().zip(b).zip(&gains).map(|((p, q), g)| (1.0 - g) * p + g * q).collect())
        .collect();
    finish(channels, pair.sample_rate())
}

/// Single-band parameters equivalent to [`linear_mix`]: both fades start at
/// `C_in` with slope `1 / (C_out - C_in)`.
pub fn linear_params(region: Interval) -> MixerParams {
    let fade = FadeParams::new(region.lo, 1.0 / region.width());
    let track = TrackParams { fades: vec![fade], filters: Vec::new() };
    MixerParams { track1: track.clone(), track2: track }
}

pub fn rule_mix(pair: &PreparedPair, presets: &RulePresets, t: TransitionType, cfg: &RenderConfig) -> Result<Rendered> {
    let (params, layout) = presets.bind(t, pair.region())?;
    render(pair, &params, &layout, cfg)
}
