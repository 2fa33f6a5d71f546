use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] flowcast::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn in_file(path: &Path, err: flowcast::Error) -> Self {
        match err {
            flowcast::Error::Io(source) => CliError::io(path, source),
            other if other.is_numerical() => CliError::Core(other),
            other => CliError::Core(flowcast::Error::Schema(format!("{}: {other}", path.display()))),
        }
    }

    /// 2 usage, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 4,
            _ => 3,
        }
    }
}
