use std::fmt;
use std::path::{Path, PathBuf};

/// Malformed or inconsistent input, located in a file.
#[derive(Debug, thiserror::Error)]
pub struct DataError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl DataError {
    pub fn at_line(path: &Path, line: usize, message: impl fmt::Display) -> Self {
        Self {
            path: path.to_path_buf(),
            line: Some(line),
            message: message.to_string(),
        }
    }

    pub fn in_file(path: &Path, message: impl fmt::Display) -> Self {
        Self {
            path: path.to_path_buf(),
            line: None,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.path.display(), line, self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

/// Flags that parse but do not make sense together.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}
