//! File formats and subcommands behind the `cloudprint` binary.

// `!(x <= tol)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

use thiserror::Error;

pub mod commands;
pub mod csvio;
pub mod ecf;
pub mod report;

pub use commands::{run, Cli, Outcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Ecf {
        path: PathBuf,
        #[source]
        source: ecf::EcfError,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Core(#[from] cloudprint::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Prefix a CSV parse error with the file it came from.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            Self::Csv(msg) => Self::Csv(format!("{}: {msg}", path.display())),
            other => other,
        }
    }
}

/// Process exit codes.
pub mod exit {
    pub const STOLEN: i32 = 0;
    pub const NOT_PROVEN: i32 = 1;
    pub const ERROR: i32 = 2;
}

/// Size the global rayon pool from `ECF_THREADS` when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ECF_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "ECF_THREADS must be a positive integer (got `{raw}`)"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("ECF_THREADS: {e}")))
}
