use std::fmt;

/// Command failure, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or inconsistent inputs (exit 1).
    Usage(String),
    /// A numerical routine failed or a check did not pass (exit 2).
    Numeric(String),
    /// Missing, unreadable or malformed files (exit 3).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<regnets::Error> for CliError {
    fn from(e: regnets::Error) -> Self {
        match e {
            regnets::Error::Io(_) | regnets::Error::Format(_) => CliError::Io(e.to_string()),
            e if e.is_numeric() => CliError::Numeric(e.to_string()),
            e => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
