use alloc::string::String;
use core::fmt;

use crate::ode::FixedPointId;

/// Failure modes of the numerical kernels.
///
/// Anything a caller could reasonably branch on gets its own variant; the
/// command-line layer maps these onto process exit codes.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// An input lies outside the mathematical domain of the operation.
    Domain(String),
    /// The step controller drove the step size below the floor, or the step
    /// budget ran out, while re-integrating for reconstruction.
    StepFailure { s: f64, h: f64 },
    /// A series recursion hit a near-singular divisor matrix, so coefficients
    /// at this order are unreliable.
    Resonance { exponent: f64, order: u32 },
    /// A trajectory was captured by a fixed point other than the expected one.
    UnexpectedCapture {
        expected: FixedPointId,
        found: FixedPointId,
    },
    /// Classification ran out of flow time without a verdict, so a bracketing
    /// search cannot assign this parameter to either side.
    Undecided { parameter: f64, s_max: f64 },
    /// Bracket endpoints do not straddle the transition being searched for.
    NoBracket { lo: f64, hi: f64 },
    /// Two trajectories have no overlapping window to be compared on.
    Incomparable(String),
}

impl fmt::Display for Error {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(what) => write!(out, "domain error: {what}"),
            Error::StepFailure { s, h } => {
                write!(out, "integration step failure at s = {s} (step size {h})")
            }
            Error::Resonance { exponent, order } => write!(
                out,
                "resonant divisor for exponent {exponent} at series order {order}"
            ),
            Error::UnexpectedCapture { expected, found } => {
                write!(out, "trajectory captured by {found}, expected {expected}")
            }
            Error::Undecided { parameter, s_max } => write!(
                out,
                "no verdict for parameter {parameter} within flow time {s_max}"
            ),
            Error::NoBracket { lo, hi } => {
                write!(out, "endpoints {lo} and {hi} do not bracket a transition")
            }
            Error::Incomparable(why) => write!(out, "trajectories not comparable: {why}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

impl Error {
    pub(crate) fn domain(what: impl Into<String>) -> Error {
        Error::Domain(what.into())
    }
}
