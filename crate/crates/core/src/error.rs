use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Extents disagree along a named axis.
    Dimension {
        op: &'static str,
        axis: String,
        expected: usize,
        got: usize,
    },
    /// Window / stride / padding combination has no valid output.
    Geometry { op: &'static str, detail: String },
    /// A scalar parameter is outside its admissible range.
    Parameter { name: String, detail: String },
    /// Caller broke an API contract (non-scalar loss, missing gradient, ...).
    Contract(String),
    /// Model or layer parameters are inconsistent with the requested topology.
    Config(String),
    /// Batch statistics cannot be estimated from the given batch.
    DegenerateStatistics { op: &'static str, count: usize },
    /// An index is outside `0..bound`.
    Index { what: &'static str, index: usize, bound: usize },
    /// A NaN or infinity was produced.
    NonFinite(String),
    /// Failure reported by an external clip source.
    Source(String),
}

impl Error {
    pub(crate) fn dim(op: &'static str, axis: impl Into<String>, expected: usize, got: usize) -> Self {
        Error::Dimension {
            op,
            axis: axis.into(),
            expected,
            got,
        }
    }

    pub(crate) fn geometry(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Geometry {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn param(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parameter {
            name: name.into(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension {
                op,
                axis,
                expected,
                got,
            } => write!(f, "{op}: dimension mismatch on axis `{axis}`: expected {expected}, got {got}"),
            Error::Geometry { op, detail } => write!(f, "{op}: invalid geometry: {detail}"),
            Error::Parameter { name, detail } => write!(f, "invalid parameter `{name}`: {detail}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::DegenerateStatistics { op, count } => {
                write!(f, "{op}: degenerate batch statistics from {count} element(s) per channel")
            }
            Error::Index { what, index, bound } => {
                write!(f, "{what} index {index} out of range 0..{bound}")
            }
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Source(msg) => write!(f, "clip source: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
