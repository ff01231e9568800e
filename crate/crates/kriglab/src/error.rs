use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("`{key}` does not apply to {section} kind `{kind}`")]
    IrrelevantKey {
        section: &'static str,
        kind: String,
        key: &'static str,
    },

    #[error("missing `{section}.{key}`")]
    Missing {
        section: &'static str,
        key: &'static str,
    },

    #[error("cannot parse {path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("could not serialize configuration: {0}")]
    Serialize(#[from] toml::ser::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("cannot write output: {0}")]
    Stdout(#[source] std::io::Error),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),

    #[error(transparent)]
    Core(#[from] kriglab_core::Error),
}

impl CliError {
    /// 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_failures_exit_with_two() {
        assert_eq!(CliError::Core(kriglab_core::Error::NonFiniteKernel).exit_code(), 2);
        assert_eq!(CliError::Core(kriglab_core::Error::Factorization("pivot".into())).exit_code(), 2);
        assert_eq!(CliError::Core(kriglab_core::Error::DegenerateBox).exit_code(), 1);
        assert_eq!(CliError::Config("bad".into()).exit_code(), 1);
    }
}
