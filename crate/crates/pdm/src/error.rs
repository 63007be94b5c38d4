use std::io;
use std::path::{Path, PathBuf};

use pdm_core::features::FeatureError;
use pdm_core::labelling::LabelError;
use pdm_core::run_store::DatasetError;
use pdm_core::svm::SvmError;
use pdm_core::validation::ValidationError;

/// A configuration value that failed to parse or validate. `path` is the
/// dotted field path, e.g. `scoring.beta`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("config error at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl ToString) -> Self {
        ConfigError { path: path.into(), message: message.to_string() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("no manifest at {}", .0.display())]
    MissingManifest(PathBuf),
    #[error("{}:{line}: {message}", file.display())]
    MalformedRow { file: PathBuf, line: u64, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("missing {what} at {}; run `pdm {command}` first", path.display())]
    StageDependencyMissing { what: &'static str, path: PathBuf, command: &'static str },
    #[error("{0}")]
    Inconsistent(String),
}

impl DataError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
        move |source| DataError::Io { path: path.to_path_buf(), source }
    }

    pub fn malformed(file: &Path, line: u64, message: impl ToString) -> DataError {
        DataError::MalformedRow { file: file.to_path_buf(), line, message: message.to_string() }
    }
}

/// Any failure of a `pdm` command.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

impl From<DatasetError> for Error {
    fn from(e: DatasetError) -> Self {
        Error::Data(DataError::Dataset(e))
    }
}

impl Error {
    /// Process exit code: 2 configuration, 3 data, 4 solver non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Validation(ValidationError::Svm(SvmError::NonConvergence { .. })) => 4,
            Error::Validation(ValidationError::TooManyFolds { .. } | ValidationError::GridEmpty) => 2,
            Error::Validation(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
