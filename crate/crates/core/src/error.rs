use thiserror::Error;

/// Errors raised by the numerical kernels and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter {name} = {value} lies outside the admissible domain {domain}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        domain: String,
    },
    #[error("quadrature failed to reach tolerance: {0}")]
    QuadratureFailure(String),
    #[error("root finding failed: {0}")]
    RootFindFailure(String),
    #[error("point {0} is outside the interior of the support")]
    OutOfSupport(f64),
    #[error("dimension error: {0}")]
    DimensionError(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("MGF profile has no usable entries")]
    EmptyProfile,
    #[error("lambda grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("numerical blow-up at t = {time}: {detail}")]
    NumericalBlowup { time: f64, detail: String },
    #[error("dimension {n} exceeds the supported maximum {max}")]
    DimensionTooLarge { n: usize, max: usize },
    #[error("interpolation error: {0}")]
    InterpolationError(String),
    #[error("config error in `{field}`: {message}")]
    ConfigError { field: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn out_of_domain(name: &'static str, value: f64, domain: impl Into<String>) -> Self {
        Error::OutOfDomain {
            name,
            value,
            domain: domain.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
