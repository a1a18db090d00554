use thiserror::Error;

/// Errors produced anywhere in the inversion pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("resonant wavenumber k = {k}: discrete system is singular (scaled pivot {pivot:.3e})")]
    Resonant { k: f64, pivot: f64 },

    #[error("singular reduced system at k = {k} (condition estimate {condition:.3e})")]
    SingularSystem { k: f64, condition: f64 },

    #[error("shifted mass matrix M + {epsilon:e} I is not positive definite; increase epsilon")]
    NotPositiveDefinite { epsilon: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("forward solve failed at k = {k}: {source}")]
    AtWavenumber {
        k: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn at_k(self, k: f64) -> Self {
        Error::AtWavenumber {
            k,
            source: Box::new(self),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the root cause is a numerical failure rather than bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Resonant { .. }
            | Error::SingularSystem { .. }
            | Error::NotPositiveDefinite { .. } => true,
            Error::AtWavenumber { source, .. } | Error::Stage { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) | Error::File { .. } | Error::Csv(_) => true,
            Error::AtWavenumber { source, .. } | Error::Stage { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
