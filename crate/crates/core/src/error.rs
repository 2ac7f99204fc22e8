use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Two grids or voxel sets do not share a common lattice.
    #[error("alignment error: {0}")]
    Alignment(String),
    /// A memory or dimension guard was exceeded.
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
