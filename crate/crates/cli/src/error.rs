use std::fmt;

/// Failure categories, each mapped to a distinct process exit code so
/// scripts can tell a bad config from a numeric breakdown from a missed
/// acceptance threshold.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, unparsable, or invalid configuration (exit 2).
    Config(String),
    /// A numeric routine failed while running (exit 3).
    Numeric(String),
    /// A --check threshold was not met (exit 4).
    Check(String),
    /// Filesystem failure on an output artifact (exit 1).
    Io(String),
    /// The stdout reader went away (e.g. `ma1lab simulate | head`).
    /// Reported silently with the shell's SIGPIPE convention.
    Pipe,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Check(_) => 4,
            CliError::Pipe => 141,
        }
    }

    /// True for the one failure that should not print anything.
    pub fn is_quiet(&self) -> bool {
        matches!(self, CliError::Pipe)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Pipe => write!(f, "stdout closed early"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ma1lab_core::Error> for CliError {
    fn from(e: ma1lab_core::Error) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            CliError::Pipe
        } else {
            CliError::Io(e.to_string())
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if let csv::ErrorKind::Io(io) = e.kind() {
            if io.kind() == std::io::ErrorKind::BrokenPipe {
                return CliError::Pipe;
            }
        }
        CliError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attach beta/replication context to an error bubbling out of a run.
pub fn with_run_context<T>(
    r: std::result::Result<T, ma1lab_core::Error>,
    beta: f64,
    rep: usize,
) -> Result<T> {
    r.map_err(|e| CliError::Numeric(format!("beta {beta} rep {rep}: {e}")))
}
