use std::fmt;

/// Failure of a CLI invocation, mapped onto the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Unreadable or invalid configuration (exit code 2).
    Config(String),
    /// A numerical routine failed (exit code 3). Outputs may already exist.
    Numerical(String),
    /// Filesystem failure while writing results (exit code 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<lbo_core::Error> for CliError {
    fn from(e: lbo_core::Error) -> Self {
        match e {
            lbo_core::Error::InvalidParameter { .. } | lbo_core::Error::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let cfg: CliError = lbo_core::Error::DimensionMismatch { expected: 2, got: 3 }.into();
        assert_eq!(cfg.exit_code(), 2);
        let num: CliError = lbo_core::Error::Conditioning { size: 4, jitter: 1e-6 }.into();
        assert_eq!(num.exit_code(), 3);
        let num: CliError = lbo_core::Error::LambertDomain(-1.0).into();
        assert_eq!(num.exit_code(), 3);
        let io: CliError = std::io::Error::other("disk").into();
        assert_eq!(io.exit_code(), 1);
    }
}
