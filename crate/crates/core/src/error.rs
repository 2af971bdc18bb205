use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, VogError>;

#[derive(Debug, Error)]
pub enum VogError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    Shape {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("{what} index {index} out of range (must be < {bound})")]
    Index {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("{0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("file not found: {0}")]
    NotFound(PathBuf),

    #[error("format error in field `{field}`: {message}")]
    Format { field: &'static str, message: String },

    #[error("corrupt data in {path}: {message}")]
    Corruption { path: PathBuf, message: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch} (lr = {lr})")]
    Divergence { epoch: usize, batch: usize, lr: f64 },

    #[error("correlation undefined: {0}")]
    Undefined(String),

    #[error("analysis failed: {0}")]
    Analysis(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl VogError {
    /// Stable machine-readable tag used by the CLI's `error_kind: message` line.
    pub fn kind(&self) -> &'static str {
        match self {
            VogError::Shape { .. } => "shape_error",
            VogError::Index { .. } => "index_error",
            VogError::Validation(_) => "validation_error",
            VogError::Io { .. } => "io_error",
            VogError::NotFound(_) => "not_found",
            VogError::Format { .. } => "format_error",
            VogError::Corruption { .. } => "corruption_error",
            VogError::Divergence { .. } => "divergence_error",
            VogError::Undefined(_) => "undefined_error",
            VogError::Analysis(_) => "analysis_error",
            VogError::Json(_) => "json_error",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            VogError::NotFound(path)
        } else {
            VogError::Io { path, source }
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        VogError::Validation(msg.into())
    }
}
