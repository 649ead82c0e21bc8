use std::path::PathBuf;

use thiserror::Error;

use tadrefine_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Unreadable {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Invalid { path: PathBuf, source: CoreError },

    #[error("{0}")]
    Usage(String),

    #[error("{} video(s) failed:\n{}", failures.len(), summary(failures))]
    Processing { failures: Vec<(String, CoreError)> },

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn summary(failures: &[(String, CoreError)]) -> String {
    failures
        .iter()
        .map(|(id, e)| format!("  {id}: {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Processing { .. } | CliError::Write { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Unreadable { .. } => 3,
            CliError::Invalid {
                source: CoreError::UnitMismatch { .. },
                ..
            } => 5,
            CliError::Invalid { .. } => 4,
        }
    }

    pub fn invalid(path: &std::path::Path) -> impl FnOnce(CoreError) -> CliError + '_ {
        move |source| CliError::Invalid {
            path: path.to_owned(),
            source,
        }
    }
}
