use std::fmt;

/// Failure classes of the CLI, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration.
    Config(String),
    /// The data itself is unusable: empty measures, bad atom files, I/O failures.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Library errors raised while running an experiment are data errors, except
/// for argument validation, which traces back to the config.
impl From<hriesz::Error> for CliError {
    fn from(e: hriesz::Error) -> Self {
        match e {
            hriesz::Error::InvalidArgument(_) | hriesz::Error::ZeroDimension => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}
