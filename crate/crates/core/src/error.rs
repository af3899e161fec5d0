use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (even `n`, `lambda <= 0`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or invalid caller input (grid mismatch, bad configuration).
    #[error("usage error: {0}")]
    Usage(String),

    /// An entry above the stored grid was needed and no padding was supplied.
    #[error("entry n = {n} lies above the working grid (N_work = {n_work}); a padding value is required")]
    PaddingRequired { n: usize, n_work: usize },

    /// A denominator vanished while building or mapping a sequence.
    #[error("singular denominator at n = {n} for lambda = {lambda}: {what}")]
    Singular {
        lambda: f64,
        n: usize,
        what: &'static str,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
