use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library.
///
/// Each variant maps onto one of the CLI exit categories through
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The model assigns zero likelihood to an observed event.
    #[error("intensity is zero at event t = {time}")]
    ZeroIntensity { time: f64 },

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("internal numerical error: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Short machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Validation(_) => "validation",
            Error::Parse { .. } => "parse",
            Error::ZeroIntensity { .. } => "zero_intensity",
            Error::Initialization(_) => "initialization",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Process exit code: 2 validation, 3 numerical/fit, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Validation(_) | Error::Parse { .. } => 2,
            Error::Json(e) if e.is_io() => 4,
            Error::Json(_) => 2,
            Error::ZeroIntensity { .. } | Error::Initialization(_) | Error::Numerical(_) => 3,
            Error::Io(_) => 4,
        }
    }
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be finite, got {value}")))
    }
}
