use std::path::PathBuf;

/// Errors raised anywhere in the simulation, learning or tooling layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("no pure-strategy equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("round {round}: {source}")]
    Round {
        round: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach the voting round in which the error surfaced.
    pub fn in_round(self, round: u64) -> Self {
        match self {
            e @ Error::Round { .. } => e,
            e => Error::Round {
                round,
                source: Box::new(e),
            },
        }
    }
}
