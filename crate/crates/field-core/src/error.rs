use thiserror::Error;

/// Errors raised by field construction, decomposition and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image format error: {0}")]
    ImageFormat(String),

    #[error("field dump error: {0}")]
    Dump(String),

    #[error("zero brightness at pixel ({row}, {col}): |u| below tolerance in strict mode")]
    ZeroBrightness { row: usize, col: usize },
}
