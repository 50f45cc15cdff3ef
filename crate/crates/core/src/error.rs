use std::path::PathBuf;

use thiserror::Error;

use crate::pointset::IndexSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension d={d} is not supported here (requires d >= {min})")]
    UnsupportedDimension { d: usize, min: usize },

    /// The selected points are linearly dependent (up to tolerance), so the
    /// point set is not generic.
    #[error("degenerate point selection {index_set}: pivot {pivot:.3e} below tolerance")]
    Degenerate { index_set: IndexSet, pivot: f64 },

    #[error("point {index} has norm {norm} (not on the unit sphere)")]
    NotOnSphere { index: usize, norm: f64 },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
