use thiserror::Error;

/// Errors raised by the linear algebra, privacy and PCA routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("deflation direction is not in the projector image (residual {residual:.3e})")]
    Deflation { residual: f64 },

    #[error("projected direction has norm {norm:.3e}, below tolerance")]
    DegenerateDirection { norm: f64 },

    #[error("matrix columns are rank deficient (column {column})")]
    Rank { column: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("insufficient data: need {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("private histogram returned no bin")]
    RangeFailure,

    #[error("eigengap privatization failed after {retries} retries")]
    GapFailure { retries: usize },

    #[error("oracle failed in deflation round {round}: {source}")]
    Oracle {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable tag written to the `status` column of result rows.
    pub fn status_tag(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Deflation { .. } => "deflation_error",
            Error::DegenerateDirection { .. } => "degenerate_direction",
            Error::Rank { .. } => "rank_error",
            Error::OutOfRange(_) => "out_of_range",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::RangeFailure => "range_failure",
            Error::GapFailure { .. } => "gap_failure",
            Error::Oracle { source, .. } => source.status_tag(),
            Error::Usage(_) => "usage_error",
            Error::Config { .. } => "config_error",
            Error::Io(_) => "io_error",
            Error::Csv(_) => "csv_error",
        }
    }
}
