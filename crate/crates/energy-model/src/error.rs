use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error(transparent)]
    GNorm(#[from] gnorm::Error),
}
