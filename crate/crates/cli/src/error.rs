use std::path::Path;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{failed} of {total} checks failed")]
    Verification { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Invalid(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Verification { .. } => 3,
        })
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn reading(path: &Path, source: std::io::Error) -> Self {
        CliError::io(format!("cannot read {}", path.display()), source)
    }

    pub fn writing(path: &Path, source: std::io::Error) -> Self {
        CliError::io(format!("cannot write {}", path.display()), source)
    }
}

impl From<seqnorm_core::Error> for CliError {
    fn from(e: seqnorm_core::Error) -> Self {
        match e {
            seqnorm_core::Error::Io { context, source } => CliError::Io { context, source },
            other => CliError::Invalid(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
