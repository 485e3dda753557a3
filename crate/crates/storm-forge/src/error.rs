use thiserror::Error;

/// Errors across the whole pipeline. Per-seed failures (parse, rejection,
/// empty pools) are skippable by the campaign driver; the rest abort the
/// operation that raised them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: u32,
        column: u32,
        message: String,
    },

    #[error("sort error: {0}")]
    Sort(String),

    #[error("unsupported construct: {0}")]
    Unsupported(String),

    #[error("assignment has no binding for `{0}`")]
    MissingBinding(String),

    #[error("oracle solver unavailable: {0}")]
    OracleUnavailable(String),

    #[error("seed rejected: {0}")]
    SeedRejected(String),

    #[error("no predicate survived fragmentation: {0}")]
    EmptyPool(String),

    #[error("construction pool stalled: {0}")]
    Stall(String),

    #[error("failed to spawn `{binary}`: {message}")]
    Spawn { binary: String, message: String },

    #[error("minimized instance no longer reproduces the unsat verdict")]
    NotReproducible,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(line: u32, column: u32, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    /// Failures that skip one seed but never abort a campaign.
    pub fn is_seed_skip(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Sort(_)
                | Error::Unsupported(_)
                | Error::SeedRejected(_)
                | Error::EmptyPool(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
