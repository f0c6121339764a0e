use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates one of the fader/filter inequalities. The
    /// message names the inequality.
    Constraint(String),
    /// Transition region with `c_in >= c_out` or outside `[0, 1]`.
    InvalidCues {
        c_in: f64,
        c_out: f64,
    },
    InvalidLayout(String),
    ShapeMismatch {
        what: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    TooFewBars {
        needed: usize,
        found: usize,
    },
    InvalidArgument(String),
    /// Optimization produced a non-finite or non-improving loss.
    Divergence {
        step: usize,
        history: Vec<f64>,
    },
    NonFinite(String),
    EmptyBatch(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Constraint(msg) => write!(f, "constraint violated: {msg}"),
            Error::InvalidCues { c_in, c_out } => {
                write!(f, "invalid cues: requires 0 <= c_in < c_out, got c_in={c_in}, c_out={c_out}")
            }
            Error::InvalidLayout(msg) => write!(f, "invalid band layout: {msg}"),
            Error::ShapeMismatch { what, expected, found } => write!(
                f,
                "shape mismatch for {what}: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::TooFewBars { needed, found } => {
                write!(f, "beat grid has {found} bars, at least {needed} required")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Divergence { step, history } => {
                write!(f, "optimization diverged at step {step} (last loss {:?})", history.last())
            }
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::EmptyBatch(what) => write!(f, "empty batch: {what}"),
        }
    }
}

impl core::error::Error for Error {}
