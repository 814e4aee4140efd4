use thiserror::Error;

use crate::time::SimTime;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time travel: requested time {now} precedes last write at {last_write}")]
    TimeTravel { now: SimTime, last_write: SimTime },

    #[error("endurance exceeded: cell has {writes} writes, limit is {limit}")]
    Endurance { writes: u64, limit: u64 },

    #[error("invalid state: {0}")]
    State(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("training diverged at epoch {epoch}: {diagnostic}")]
    Training { epoch: usize, diagnostic: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
