use thiserror::Error;

/// Errors raised while validating parameters, building, or loading structures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Param(String),

    #[error("ingestion error at line {line}: {msg}")]
    Ingest { line: usize, msg: String },

    #[error("build error: {0}")]
    Build(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("space budget exceeded: {used} bits used, limit {limit} bits ({audit})")]
    Budget { used: u64, limit: u64, audit: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Param(msg.into()))
}
