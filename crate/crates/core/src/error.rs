use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("window [{start}, {end}) overruns series of length {len}")]
    OutOfRange { start: usize, end: usize, len: usize },

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{malformed} of {total} rows malformed (limit {limit:.2}%); first: {first}")]
    TooManyMalformed {
        malformed: usize,
        total: usize,
        limit: f64,
        first: String,
    },

    #[error("transform error: {0}")]
    Transform(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidWindow(_) => "invalid-window",
            Error::OutOfRange { .. } => "out-of-range",
            Error::DegenerateSpectrum(_) => "degenerate-spectrum",
            Error::Dimension(_) => "dimension",
            Error::InvalidPanel(_) => "invalid-panel",
            Error::UndefinedCorrelation(_) => "undefined-correlation",
            Error::DegenerateFit(_) => "degenerate-fit",
            Error::Format(_) => "format",
            Error::TooManyMalformed { .. } => "malformed-rows",
            Error::Transform(_) => "transform",
            Error::Config(_) => "config",
            Error::Analysis(_) => "analysis",
            Error::Alignment(_) => "alignment",
            Error::Io(_) => "io",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            other => Error::Format(format!("{other:?}")),
        }
    }
}
