use std::path::PathBuf;

use chrono::{DateTime, Utc};

use crate::model::Product;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{source_name}:{line}: parse error: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("{source_name}:{line}: invalid record: {message}")]
    Validation {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("missing {what} for product {product}")]
    DataGap { what: String, product: Product },

    #[error("window too large for exhaustive search: {products} products (max {max})")]
    Size { products: usize, max: usize },

    #[error("optimizer reported an infeasible window at {at}: {reason}")]
    Infeasible {
        at: DateTime<Utc>,
        reason: String,
        dump: Box<crate::optimizer::WindowDump>,
    },

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
