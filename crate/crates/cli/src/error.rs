use thiserror::Error;

/// Everything that can stop a command, with the exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("unit error at `{key}`: {message}")]
    Unit { key: String, message: String },

    #[error("invalid scenario: {0}")]
    Scenario(electroad::Error),

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Solve(electroad::Error),

    #[error("profile simulation failed: {0}")]
    ProfileSolve(electroad::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. }
            | CliError::Unit { .. }
            | CliError::Scenario(_)
            | CliError::Usage(_) => 2,
            CliError::ProfileSolve(e) if e.is_non_convergence() => 3,
            _ => 1,
        }
    }
}
