//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed or truncated on-disk data (bad magic, short payload, ...).
    #[error("format error: {0}")]
    Format(String),

    /// A non-finite value where the invariants require finite data.
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
