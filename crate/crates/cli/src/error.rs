use fisc_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Bench(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 configuration, 3 numeric or solver, 4 I/O, 1 failed benchmark.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Bench(_) => 1,
            CliError::Core(e) => match e {
                CoreError::Io(_) | CoreError::Csv(_) | CoreError::Json(_) => 4,
                CoreError::Numeric(_)
                | CoreError::Solver { .. }
                | CoreError::Infeasible { .. }
                | CoreError::EmptyRange(_)
                | CoreError::UndefinedAuc(_) => 3,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
