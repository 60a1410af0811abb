use alloc::string::String;
use core::fmt;

/// Errors raised by the analysis core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Malformed expression text; `position` is a byte offset.
    Syntax { position: usize, message: String },
    UnknownFunction { name: String, position: usize },
    Arity { name: String, expected: usize, found: usize },
    UnboundVariable(String),
    /// `ln`, `sqrt`, `pow` or division outside its domain.
    Domain { operation: &'static str, argument: f64 },
    /// A parameter or argument outside an operation's precondition.
    InvalidArgument(String),
    /// Monotone inversion could not bracket the target value.
    NoPreimage { target: f64, reason: &'static str },
    /// A quadrature integrand evaluated to zero, a negative value or a non-finite value.
    Quadrature { at: f64, reason: &'static str },
    /// The simulated state left the finite range (|x| > 1e12 or NaN).
    BlowUp { time: f64, norm: f64 },
    /// A sampled trial sequence fails its dwell-time condition.
    InadmissibleSequence { trial: usize, reason: String },
    /// An evaluation failure at a grid point.
    EvaluationAt { point: f64, source: alloc::boxed::Box<Error> },
    /// An evaluation failure attributed to one audit sample.
    Sample { index: usize, source: alloc::boxed::Box<Error> },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Syntax { position, message } => {
                write!(f, "syntax error at position {position}: {message}")
            }
            Error::UnknownFunction { name, position } => {
                write!(f, "unknown function `{name}` at position {position}")
            }
            Error::Arity { name, expected, found } => {
                write!(f, "function `{name}` takes {expected} argument(s), found {found}")
            }
            Error::UnboundVariable(name) => write!(f, "unknown variable {name}"),
            Error::Domain { operation, argument } => {
                write!(f, "domain error: {operation} of {argument}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::NoPreimage { target, reason } => {
                write!(f, "no preimage for {target}: {reason}")
            }
            Error::Quadrature { at, reason } => write!(f, "quadrature failed at {at}: {reason}"),
            Error::BlowUp { time, norm } => {
                write!(f, "trajectory blew up at t = {time} (|x| = {norm:e})")
            }
            Error::InadmissibleSequence { trial, reason } => {
                write!(f, "trial {trial}: no admissible certificate: {reason}")
            }
            Error::EvaluationAt { point, source } => write!(f, "at {point}: {source}"),
            Error::Sample { index, source } => write!(f, "sample {index}: {source}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
