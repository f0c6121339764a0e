//! IO, signal processing and command-line front end for the differentiable
//! DJ transition mixer in [`djmix_core`].
//!
//! Typical flow: read two tracks, derive cue points from beat grids, cut a
//! window around the transition ([`prepare::prepare_pair`]), then render it
//! with explicit parameters, a baseline strategy, or parameters learned by
//! [`learn`].

pub mod audio;
pub mod cli;
pub mod error;
pub mod formats;
pub mod learn;
pub mod prepare;
pub mod render;
pub mod stft;
pub mod strategies;
pub mod synth;

pub use djmix_core as core;
pub use error::{Error, Result};
