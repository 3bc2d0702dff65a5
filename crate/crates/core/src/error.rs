use alloc::boxed::Box;
use core::fmt;

use crate::plant::PlantEquilibrium;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain { what: &'static str, value: f64 },
    /// Instrument parameters violate an invariant.
    InvalidParams(&'static str),
    /// A NaN or infinite value reached an input boundary.
    NonFinite(&'static str),
    /// A cable tension is negative.
    NegativeTension { index: usize, value: f64 },
    /// Per-cable data does not match the instrument's cable count.
    CableCount { expected: usize, found: usize },
    /// An observed pose does not carry a proper rotation.
    NotOrthonormal { deviation: f64 },
    /// The observed tip lies at the base origin.
    TipAtOrigin,
    /// The elastica plant did not reach its gradient tolerance; carries the last iterate.
    PlantNotConverged(Box<PlantEquilibrium>),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of range: {value}"),
            Error::InvalidParams(msg) => write!(f, "invalid instrument parameters: {msg}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::NegativeTension { index, value } => {
                write!(f, "cable {} tension is negative ({value} N)", index + 1)
            }
            Error::CableCount { expected, found } => {
                write!(f, "expected {expected} cable values, found {found}")
            }
            Error::NotOrthonormal { deviation } => {
                write!(f, "rotation is not orthonormal (deviation {deviation:e})")
            }
            Error::TipAtOrigin => write!(f, "observed tip position coincides with the base"),
            Error::PlantNotConverged(last) => write!(
                f,
                "plant equilibrium not converged after {} iterations (gradient norm {:e})",
                last.iterations, last.gradient_norm
            ),
        }
    }
}

impl core::error::Error for Error {}
