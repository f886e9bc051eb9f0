use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("property violation: {0}")]
    Violation(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical validation failed: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Violation(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Config(format!("{}: {err}", path.display()))
    }
}

/// Library errors raised while computing, as opposed to while building the
/// protocol, are numerical failures.
pub fn numerical(context: &str) -> impl FnOnce(gauge_thermo::Error) -> CliError + '_ {
    move |e| CliError::Numerical(format!("{context}: {e}"))
}

pub type CliResult<T> = std::result::Result<T, CliError>;
