use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point ({t1}, {t2}) lies outside the support region (R = {radius})")]
    OutsideDomain { t1: f64, t2: f64, radius: f64 },

    #[error("point ({t1}, {t2}) is not in strip {strip}")]
    WrongStrip { t1: f64, t2: f64, strip: usize },

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("brute-force matching supports at most {cap} atoms in total, got {got}")]
    SizeCap { cap: usize, got: usize },

    #[error(
        "cell level {level} is finer than the finest represented level {finest} in strip {strip}"
    )]
    LevelTooFine {
        strip: usize,
        level: usize,
        finest: usize,
    },

    #[error("transport solver: {0}")]
    Solver(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("N = {samples}, replicate {replicate}: {source}")]
    Job {
        samples: usize,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Whether the error stems from bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        if let Error::Job { source, .. } = self {
            return source.is_validation();
        }
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::OutsideDomain { .. }
                | Error::WrongStrip { .. }
                | Error::Parse { .. }
                | Error::SizeCap { .. }
                | Error::LevelTooFine { .. }
        )
    }
}
