//! Differentiable DJ transition mixer.
//!
//! Two tracks meet inside a transition region. Each track is shaped by a
//! time-frequency mask built from clipped linear ramps: `k` time fades (one
//! per sub-band) and `k - 1` frequency low-pass curves that split the
//! spectrum into `k` bands. Everything here is pure arithmetic over `f64`
//! grids, so the crate is `no_std` (it needs `alloc`).
//!
//! ```
//! use djmix_core::curves::{Axis, BandLayout, Interval};
//! use djmix_core::mixer::{build_masks_on, constrain, ParamLayout, RawParams};
//!
//! let layout = BandLayout::from_hz(4, &[20.0, 300.0, 5000.0, 20000.0], 44100.0).unwrap();
//! let region = Interval::new(0.25, 0.75);
//! let raw = RawParams::filled(ParamLayout::new(4, false), 0.5);
//! let params = constrain(&raw, region, &layout).unwrap();
//! let (m1, m2) = build_masks_on(&params, &Axis::linear(32), &Axis::linear(65), &layout).unwrap();
//! assert!(m1.data().iter().chain(m2.data()).all(|&m| (-1e-12..=1.0 + 1e-12).contains(&m)));
//! ```
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod cueing;
pub mod curves;
pub mod disc;
mod error;
pub mod fit;
pub mod gan;
pub mod grad;
pub mod grid;
pub mod mel;
pub mod mixer;
pub mod optim;

pub use error::{Error, Result};
pub use grid::Grid;
