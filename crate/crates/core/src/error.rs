use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its documented domain.
    InvalidParameter { name: &'static str, reason: String },
    /// A likelihood query for an output that is not in the finite alphabet.
    InvalidQuery(String),
    /// Cell probability is below the representable floor.
    Underflow { lower: f64, upper: f64 },
    /// Order-doubling disagreement above tolerance.
    NonConvergence { quantity: &'static str, coarse: f64, fine: f64 },
    /// The channel output carries no power, or the metric has no finite optimum.
    Degenerate(&'static str),
    /// A Monte Carlo plan exceeds the exhaustive-decoding budget.
    CapExceeded { messages: f64, cap: u64 },
    /// The banded system could not be factored.
    Singular { pivot: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::InvalidQuery(msg) => write!(f, "invalid query: {msg}"),
            Error::Underflow { lower, upper } => {
                write!(f, "probability of cell ({lower}, {upper}) underflows")
            }
            Error::NonConvergence { quantity, coarse, fine } => write!(
                f,
                "quadrature did not converge for {quantity}: {coarse} vs {fine} at doubled order"
            ),
            Error::Degenerate(what) => write!(f, "degenerate: {what}"),
            Error::CapExceeded { messages, cap } => {
                write!(f, "{messages} messages exceeds exhaustive decoding cap of {cap}")
            }
            Error::Singular { pivot } => write!(f, "system is numerically singular at pivot {pivot}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
