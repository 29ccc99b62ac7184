//! Crate-wide error type.
//!
//! Variants map one-to-one onto the machine-parsable categories the CLI
//! prints on failure, so library callers and shell scripts see the same
//! taxonomy.

use std::path::PathBuf;

/// Error type shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Underlying I/O failure (unreadable file, full disk, ...).
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Input bytes do not look like the expected file format.
    #[error("format error in {path}{}: {message}", fmt_line(*.line))]
    Format {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },

    /// Well-formed input that violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// Model file carries an unsupported format version.
    #[error("model version error: found {found}, supported {supported}")]
    ModelVersion { found: u32, supported: u32 },

    /// Model file is not a readable model document.
    #[error("corrupt model file: {0}")]
    ModelCorrupt(String),
}

impl Error {
    /// Short stable category token, one per variant.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::Validation(_) => "validation",
            Error::ModelVersion { .. } => "model-version",
            Error::ModelCorrupt(_) => "model-corrupt",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: Option<u64>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), line, message: message.into() }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }
}

fn fmt_line(line: Option<u64>) -> String {
    match line {
        Some(n) => format!(" (line {n})"),
        None => String::new(),
    }
}
