use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure of a subcommand, mapped onto the documented exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unparseable input file or invalid parameters: exit 2.
    #[error("{0}")]
    Input(String),
    /// A module failed on valid input: exit 3.
    #[error("{0}")]
    Extraction(String),
    /// Exit 4.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// The fit hit its iteration cap; the best result was still written. Exit 5.
    #[error("{0}")]
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Extraction(_) => 3,
            Self::Io { .. } => 4,
            Self::NotConverged(_) => 5,
        }
    }

    pub fn input(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        Self::Input(format!("{context}: {err}"))
    }

    pub fn extraction(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        Self::Extraction(format!("{context}: {err}"))
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
