use thiserror::Error;

/// Everything that ends a run early. Exit code 2 for all of them; bound
/// failures under `--strict` are reported separately with code 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] ncprob::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Numerical(e) => match e {
                ncprob::Error::SizeLimit { .. } => "size-limit",
                ncprob::Error::InvalidInput(_) => "invalid-input",
                ncprob::Error::Domain(_) => "domain",
                ncprob::Error::Unsupported(_) => "unsupported",
                ncprob::Error::Numerical(_) | ncprob::Error::Radius { .. } => "numerical",
                ncprob::Error::Json(_) => "json",
            },
            Self::Io(_) => "io",
            Self::Csv(_) => "csv",
            Self::Json(_) => "json",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
