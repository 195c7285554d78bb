use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },

    #[error("empty or non-OSM input: {0}")]
    EmptyInput(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid boundary: {0}")]
    Boundary(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("evaluation instant {eval} precedes last version timestamp {last}")]
    EvalBeforeLastVersion {
        eval: crate::element::Timestamp,
        last: crate::element::Timestamp,
    },

    #[error("no direct score for feature {0}")]
    MissingDirectScore(crate::element::ElementId),
}

impl Error {
    /// Config errors map to a distinct process exit code.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
