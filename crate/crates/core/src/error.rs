use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegisterError {
    /// The register cannot host the requested number of readers.
    #[error("{kind} register supports at most {max} readers, {requested} requested")]
    Capacity {
        kind: &'static str,
        requested: usize,
        max: usize,
    },

    /// All reader handles of the register have already been handed out.
    #[error("all {0} reader handles are already in use")]
    ReadersExhausted(usize),

    #[error("the writer handle has already been taken")]
    WriterTaken,

    #[error("payload of {size} bytes is outside the accepted range {min}..={max}")]
    PayloadSize { size: usize, min: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = RegisterError> = std::result::Result<T, E>;
