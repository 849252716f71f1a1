use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, flags or input data. Exit code 2.
    #[error("config error: {0}")]
    Config(String),

    /// Unreadable input or unwritable output. Exit code 3.
    #[error("I/O error: {0}")]
    Io(String),

    /// Every trial failed, or the single recovery run did. Exit code 4.
    #[error("run failed: {0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Failed(_) => 4,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// Errors raised while loading or validating inputs.
    pub fn input(path: Option<&Path>, e: nllr_core::Error) -> Self {
        let prefix = path.map(|p| format!("{}: ", p.display())).unwrap_or_default();
        match e {
            nllr_core::Error::Io(io) => CliError::Io(format!("{prefix}{io}")),
            other => CliError::Config(format!("{prefix}{other}")),
        }
    }

    /// Errors raised by a solver run.
    pub fn solver(e: nllr_core::Error) -> Self {
        use nllr_core::Error as E;
        match e {
            E::Io(io) => CliError::Io(io.to_string()),
            E::Divergence { .. } | E::RankCollapse { .. } | E::Singular(_) | E::DegenerateInput(_) => {
                CliError::Failed(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}
