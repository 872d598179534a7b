use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("graph {graph}: {message}")]
    Validation { graph: String, message: String },

    #[error("embedding alignment: graph {graph} node {node}: {message}")]
    Alignment {
        graph: String,
        node: usize,
        message: String,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged at epoch {epoch} (loss {loss}); try a smaller learning rate")]
    Divergence { epoch: usize, loss: f64 },

    #[error("rule learning: {0}")]
    RuleLearning(String),

    #[error("receptive field has {nodes} nodes, above the orbit cap of {cap}")]
    CapExceeded { nodes: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Alignment { .. } => "alignment",
            Error::Contract(_) => "contract",
            Error::Divergence { .. } => "divergence",
            Error::RuleLearning(_) => "rule-learning",
            Error::CapExceeded { .. } => "cap-exceeded",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(graph: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            graph: graph.into(),
            message: message.into(),
        }
    }
}
