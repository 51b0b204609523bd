//! Crate-wide error type.

use thiserror::Error;

/// Top-level error for all pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("ingest: {0}")]
    Ingest(#[from] crate::ingest::IngestError),

    #[error("signature: {0}")]
    Signature(#[from] crate::signatures::SignatureError),

    #[error("database: {0}")]
    Db(#[from] crate::ossdb::DbError),

    #[error("mpc: {0}")]
    Mpc(#[from] crate::mpc::MpcError),

    #[error("sbb: {0}")]
    Sbb(#[from] crate::sbb::SbbError),

    #[error("config: {0}")]
    Config(#[from] crate::cli::config::ConfigError),

    #[error("corpus: {0}")]
    Corpus(#[from] crate::cli::corpus::CorpusError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Analysis(String),
}

impl Error {
    /// Process exit code: 1 for analysis errors, 2 for connectivity and
    /// protocol errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Mpc(e) if e.is_protocol() => 2,
            Error::Io(_) => 2,
            _ => 1,
        }
    }
}
