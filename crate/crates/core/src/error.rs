use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("time {t} outside the path interval [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("parameter `{name}` = {value} outside {range}")]
    Parameter {
        name: &'static str,
        value: f64,
        range: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("grids do not match: {0}")]
    GridMismatch(String),
    #[error("singular value: {0}")]
    Singular(String),
    #[error("non-finite quadrature in {term}: {detail}")]
    NonFinite { term: String, detail: String },
    #[error("empty admissibility window: {0}")]
    EmptyWindow(String),
    #[error("covariance not positive semidefinite: {0}")]
    NotPsd(String),
    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, range: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            value,
            range: range.into(),
        }
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
