//! Error type shared by every module.

use thiserror::Error;

use crate::bv_library::CurlReport;
use crate::variability::VariabilityReport;

/// Everything that can go wrong inside the library.
///
/// Variants split into two families: [`Error::is_precondition`] reports
/// whether the caller handed in invalid parameters, as opposed to a numerical
/// refusal raised while computing.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates the documented precondition of an operation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A pointwise map could not be evaluated at a path sample.
    #[error("map undefined at time index {index}: {reason}")]
    MapUndefined { index: usize, reason: String },

    /// The determinant of a coefficient matrix does not exceed the floor.
    #[error("matrix is singular: det = {det:e} does not exceed floor {floor:e}")]
    Singular { det: f64, floor: f64 },

    /// A fractional norm or derivative is not finite at the grid scale.
    #[error("norm `{name}` is not finite at grid scale (value {value})")]
    NormOverflow { name: &'static str, value: f64 },

    /// The quadrature of `1/sigma` diverges inside a spatial cell.
    #[error("quadrature of 1/sigma diverges in cell [{lo}, {hi}]")]
    QuadratureDivergence { lo: f64, hi: f64 },

    /// The mollified inverse coefficient is not curl-free.
    #[error("curl residual {:e} exceeds threshold {threshold:e}", report.max_residual)]
    CurlRefusal {
        report: Box<CurlReport>,
        threshold: f64,
    },

    /// Line integrals along two polyline orders disagree.
    #[error("path dependence {discrepancy:e} exceeds tolerance {tolerance:e}")]
    PathDependence { discrepancy: f64, tolerance: f64 },

    /// The angular or distortion hypothesis fails at a probe.
    #[error("distortion hypothesis fails: {0}")]
    Distortion(String),

    /// Newton inversion of a forward map failed to converge.
    #[error("inversion failed at target {target:?}: residual {residual:e}")]
    InversionFailure { target: Vec<f64>, residual: f64 },

    /// A point lies outside the range where a map is defined.
    #[error("point {point:?} lies outside the range of the map")]
    RangeViolation { point: Vec<f64> },

    /// The variability precondition of an operation is violated.
    #[error("variability precondition fails with verdict {:?}", report.verdict)]
    NotVariable { report: Box<VariabilityReport> },

    /// The Hoelder exponent of a path is too small for an operation.
    #[error("Hoelder exponent {exponent} does not exceed {required}")]
    ExponentTooLow { exponent: f64, required: f64 },

    /// Input and output files could not be read or written.
    #[error("i/o failure: {0}")]
    Io(String),
}

impl Error {
    /// True when the error reflects invalid caller input rather than a
    /// numerical refusal.
    pub fn is_precondition(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Io(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
