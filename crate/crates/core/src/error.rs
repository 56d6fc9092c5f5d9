use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("unknown face label `{0}`")]
    UnknownFace(String),

    #[error("empty node selector for `{0}`")]
    EmptySelector(String),

    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("invalid load case: {0}")]
    InvalidLoadCase(String),

    #[error("invalid density field: {0}")]
    InvalidDensity(String),

    /// Non-positive pivot during Cholesky factorization.
    #[error(
        "singular stiffness matrix: pivot {pivot:e} at equation {equation} (node {node}, {axis}); \
         max diagonal {max_diagonal:e}"
    )]
    Singular {
        equation: usize,
        node: usize,
        axis: char,
        pivot: f64,
        max_diagonal: f64,
    },

    #[error("solve cache is missing displacements for load case {0}")]
    MissingCache(usize),

    #[error("volume constraint infeasible: {0}")]
    Infeasible(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("corrupt record {path}: {reason}")]
    CorruptRecord { path: PathBuf, reason: String },

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

    /// True for errors caused by user-supplied configuration rather than runtime failures.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidDomain(_)
                | Error::UnknownFace(_)
                | Error::EmptySelector(_)
                | Error::InvalidMaterial(_)
                | Error::InvalidLoadCase(_)
                | Error::Config(_)
        )
    }
}
