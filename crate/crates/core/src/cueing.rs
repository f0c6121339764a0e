//! Transition geometry from beat-grid annotations.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::curves::Interval;
use crate::{Error, Result};

/// Largest accepted tempo difference between the two tracks, in bpm.
pub const MAX_BPM_DIFF: f64 = 5.0;
/// Largest accepted key distance, in semitones.
pub const MAX_KEY_DISTANCE: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Major,
    Minor,
}

/// Tonic pitch class (0 = C) and mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Key {
    pub tonic: u8,
    pub mode: Mode,
}

const NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

pub fn parse_pitch_class(name: &str) -> Result<u8> {
    let name = name.trim();
    let mut chars = name.chars();
    let letter = chars.next().ok_or_else(|| Error::InvalidArgument("empty key tonic".into()))?;
    let base: i32 = match letter.to_ascii_uppercase() {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return Err(Error::InvalidArgument(format!("unknown key tonic {name:?}"))),
    };
    let mut offset = 0i32;
    for c in chars {
        match c {
            '#' | '♯' => offset += 1,
            'b' | '♭' => offset -= 1,
            _ => return Err(Error::InvalidArgument(format!("unknown key tonic {name:?}"))),
        }
    }
    Ok((base + offset).rem_euclid(12) as u8)
}

impl Key {
    pub fn new(tonic: &str, mode: Mode) -> Result<Self> {
        Ok(Key { tonic: parse_pitch_class(tonic)?, mode })
    }

    /// Smallest chromatic distance between tonics, ignoring mode.
    pub fn distance(&self, other: &Key) -> u8 {
        let d = (self.tonic as i32 - other.tonic as i32).rem_euclid(12) as u8;
        d.min(12 - d)
    }

    pub fn tonic_name(&self) -> &'static str {
        NAMES[self.tonic as usize % 12]
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "major" | "maj" => Ok(Mode::Major),
            "minor" | "min" => Ok(Mode::Minor),
            _ => Err(Error::InvalidArgument(format!("unknown key mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Major => "major",
            Mode::Minor => "minor",
        })
    }
}

/// Downbeat annotation of one track.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatGrid {
    downbeats: Vec<f64>,
    bpm: f64,
    beats_per_bar: u32,
    key: Option<Key>,
}

impl BeatGrid {
    /// Validates that downbeats increase and are spaced one bar apart (within 10%).
    pub fn new(downbeats: Vec<f64>, bpm: f64, beats_per_bar: u32, key: Option<Key>) -> Result<Self> {
        if !(bpm > 0.0) || !bpm.is_finite() {
            return Err(Error::InvalidArgument(format!("bpm must be positive, got {bpm}")));
        }
        if beats_per_bar == 0 {
            return Err(Error::InvalidArgument("beats_per_bar must be at least 1".into()));
        }
        let bar = beats_per_bar as f64 * 60.0 / bpm;
        for (i, w) in downbeats.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidArgument(format!("downbeats must be strictly increasing (index {})", i + 1)));
            }
            let gap = w[1] - w[0];
            if (gap - bar).abs() > 0.1 * bar {
                return Err(Error::InvalidArgument(format!(
                    "downbeat spacing {gap:.4} s at index {} is not within 10% of one bar ({bar:.4} s)",
                    i + 1
                )));
            }
        }
        Ok(BeatGrid { downbeats, bpm, beats_per_bar, key })
    }

    /// Regular grid starting at `first` with `bars` downbeats.
    pub fn regular(first: f64, bpm: f64, beats_per_bar: u32, bars: usize, key: Option<Key>) -> Result<Self> {
        let bar = beats_per_bar as f64 * 60.0 / bpm;
        Self::new((0..bars).map(|i| first + i as f64 * bar).collect(), bpm, beats_per_bar, key)
    }

    pub fn downbeats(&self) -> &[f64] {
        &self.downbeats
    }

    pub fn bpm(&self) -> f64 {
        self.bpm
    }

    pub fn beats_per_bar(&self) -> u32 {
        self.beats_per_bar
    }

    pub fn key(&self) -> Option<Key> {
        self.key
    }

    pub fn bar_seconds(&self) -> f64 {
        self.beats_per_bar as f64 * 60.0 / self.bpm
    }
}

/// Cue points in seconds on the outgoing track's timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuePoints {
    pub c_in: f64,
    pub c_out: f64,
    /// Where sample 0 of the incoming track sits on that timeline.
    pub b_offset: f64,
}

impl CuePoints {
    pub fn new(c_in: f64, c_out: f64, b_offset: f64) -> Result<Self> {
        if !(c_in >= 0.0 && c_in < c_out) || !c_out.is_finite() || !b_offset.is_finite() {
            return Err(Error::InvalidCues { c_in, c_out });
        }
        Ok(CuePoints { c_in, c_out, b_offset })
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.c_in + self.c_out)
    }

    pub fn duration(&self) -> f64 {
        self.c_out - self.c_in
    }
}

/// `C_in` is the first downbeat of the last `bars` bars of track 1; track 2's
/// first downbeat is placed on it; `C_out` lies `bars` bars later at track 1's tempo.
pub fn compute_cues(grid1: &BeatGrid, grid2: &BeatGrid, bars: usize) -> Result<CuePoints> {
    if bars == 0 {
        return Err(Error::InvalidArgument("bars must be at least 1".into()));
    }
    for g in [grid1, grid2] {
        if g.downbeats.len() < bars {
            return Err(Error::TooFewBars { needed: bars, found: g.downbeats.len() });
        }
    }
    let c_in = grid1.downbeats[grid1.downbeats.len() - bars];
    let c_out = c_in + bars as f64 * grid1.bar_seconds();
    let b_offset = c_in - grid2.downbeats[0];
    CuePoints::new(c_in, c_out, b_offset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compatibility {
    pub compatible: bool,
    pub bpm_diff: f64,
    pub key_distance: Option<u8>,
    pub reasons: Vec<String>,
}

/// Tempo within 5 bpm and, when both keys are known, tonic within 2 semitones.
pub fn compatible(grid1: &BeatGrid, grid2: &BeatGrid) -> Compatibility {
    let bpm_diff = (grid1.bpm - grid2.bpm).abs();
    let key_distance = match (grid1.key, grid2.key) {
        (Some(a), Some(b)) => Some(a.distance(&b)),
        _ => None,
    };
    let mut reasons = Vec::new();
    if bpm_diff > MAX_BPM_DIFF {
        reasons.push(format!("bpm difference {bpm_diff} exceeds {MAX_BPM_DIFF}"));
    }
    if let Some(d) = key_distance {
        if d > MAX_KEY_DISTANCE {
            reasons.push(format!("key distance {d} semitones exceeds {MAX_KEY_DISTANCE}"));
        }
    }
    Compatibility { compatible: reasons.is_empty(), bpm_diff, key_distance, reasons }
}

/// Placement of a fixed-length analysis window centered on the cue midpoint,
/// in integer samples of the outgoing track's timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPlacement {
    /// First timeline sample of the window (negative when it starts before track 1).
    pub start: i64,
    pub len: usize,
    pub c_in: i64,
    pub c_out: i64,
    pub b_offset: i64,
}

impl WindowPlacement {
    pub fn new(cues: &CuePoints, window_sec: f64, sample_rate: f64) -> Result<Self> {
        if !(window_sec > 0.0) {
            return Err(Error::InvalidArgument(format!("window must be positive, got {window_sec}")));
        }
        if cues.duration() > window_sec {
            return Err(Error::InvalidArgument(format!(
                "transition of {:.3} s does not fit a {window_sec} s window",
                cues.duration()
            )));
        }
        let to_samples = |t: f64| libm::round(t * sample_rate) as i64;
        let len = libm::round(window_sec * sample_rate) as usize;
        let c_in = to_samples(cues.c_in);
        let c_out = to_samples(cues.c_out);
        let start = (c_in + c_out).div_euclid(2) - (len as i64) / 2;
        Ok(WindowPlacement { start, len, c_in, c_out, b_offset: to_samples(cues.b_offset) })
    }

    /// Window start in seconds.
    pub fn start_sec(&self, sample_rate: f64) -> f64 {
        self.start as f64 / sample_rate
    }

    /// Transition region normalized to the window: `(C - start) / len`.
    pub fn normalized(&self) -> Interval {
        let n = self.len as f64;
        Interval::new((self.c_in - self.start) as f64 / n, (self.c_out - self.start) as f64 / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(bpm: f64, bars: usize, key: Option<Key>) -> BeatGrid {
        BeatGrid::regular(0.5, bpm, 4, bars, key).unwrap()
    }

    #[test]
    fn eight_bars_at_120() {
        let cues = compute_cues(&grid(120.0, 40, None), &grid(120.0, 40, None), 8).unwrap();
        assert_eq!(cues.c_out - cues.c_in, 16.0);
        assert_eq!(cues.c_in, 0.5 + 32.0 * 2.0);
        assert_eq!(cues.b_offset, cues.c_in - 0.5);
    }

    #[test]
    fn region_uses_outgoing_tempo() {
        let g1 = grid(120.0, 20, None);
        let g2 = grid(124.0, 20, None);
        assert!(compatible(&g1, &g2).compatible);
        let cues = compute_cues(&g1, &g2, 8).unwrap();
        assert_eq!(cues.duration(), 16.0);
    }

    #[test]
    fn too_few_bars() {
        let err = compute_cues(&grid(120.0, 4, None), &grid(120.0, 20, None), 8).unwrap_err();
        assert_eq!(err, Error::TooFewBars { needed: 8, found: 4 });
    }

    #[test]
    fn bpm_threshold_is_inclusive() {
        assert!(compatible(&grid(128.0, 2, None), &grid(133.0, 2, None)).compatible);
        let c = compatible(&grid(128.0, 2, None), &grid(134.0, 2, None));
        assert!(!c.compatible);
        assert_eq!(c.reasons.len(), 1);
    }

    #[test]
    fn key_threshold_is_inclusive() {
        let c = Key::new("C", Mode::Major).unwrap();
        let d = Key::new("D", Mode::Major).unwrap();
        let eb = Key::new("Eb", Mode::Minor).unwrap();
        let b = Key::new("B", Mode::Major).unwrap();
        assert!(compatible(&grid(120.0, 2, Some(c)), &grid(120.0, 2, Some(d))).compatible);
        assert!(!compatible(&grid(120.0, 2, Some(c)), &grid(120.0, 2, Some(eb))).compatible);
        assert_eq!(c.distance(&b), 1);
        assert!(compatible(&grid(120.0, 2, Some(c)), &grid(120.0, 2, None)).compatible);
    }

    #[test]
    fn pitch_class_spellings() {
        assert_eq!(parse_pitch_class("C#").unwrap(), parse_pitch_class("Db").unwrap());
        assert_eq!(parse_pitch_class("Cb").unwrap(), 11);
        assert!(parse_pitch_class("H").is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(BeatGrid::new(alloc::vec![0.0, 2.0, 1.0], 120.0, 4, None).is_err());
        assert!(BeatGrid::new(alloc::vec![0.0, 3.0], 120.0, 4, None).is_err());
        assert!(BeatGrid::new(alloc::vec![0.0, 2.1], 120.0, 4, None).is_ok());
        assert!(BeatGrid::new(alloc::vec![0.0], 0.0, 4, None).is_err());
    }

    #[test]
    fn window_centered_on_cue_mid() {
        let cues = CuePoints::new(20.0, 36.0, 20.0).unwrap();
        let w = WindowPlacement::new(&cues, 60.0, 44100.0).unwrap();
        assert_eq!(cues.mid(), 28.0);
        assert_eq!(w.start, -2 * 44100);
        assert_eq!(w.len, 60 * 44100);
        let r = w.normalized();
        assert!((r.lo - 22.0 / 60.0).abs() < 1e-12);
        assert!((r.hi - 38.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_cues() {
        assert!(CuePoints::new(5.0, 5.0, 0.0).is_err());
        assert!(CuePoints::new(-1.0, 5.0, 0.0).is_err());
        let long = CuePoints::new(0.0, 70.0, 0.0).unwrap();
        assert!(WindowPlacement::new(&long, 60.0, 44100.0).is_err());
    }
}
