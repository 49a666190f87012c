use thiserror::Error;

use crate::convert::ConvertError;
use crate::ingest::IngestError;
use crate::questions::CatalogError;
use crate::sample::SampleError;
use crate::score::ScoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error for the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Convert(#[from] ConvertError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Short stable tag for the error family, used in machine-readable output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Ingest(_) => "ingest",
            Error::Catalog(_) => "catalog",
            Error::Convert(_) => "convert",
            Error::Sample(_) => "sample",
            Error::Score(_) => "score",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
