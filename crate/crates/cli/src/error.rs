use std::fmt;
use std::process::ExitCode;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Divergence(String),
    NoConvergence(String),
    Oracle(String),
    Io(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Validation(_) => 2,
            CliError::Divergence(_) => 3,
            CliError::NoConvergence(_) => 4,
            CliError::Oracle(_) => 5,
            CliError::Io(_) => 6,
            CliError::Runtime(_) => 1,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Divergence(m) => write!(f, "divergence: {m}"),
            CliError::NoConvergence(m) => write!(f, "no convergence: {m}"),
            CliError::Oracle(m) => write!(f, "reference failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<sve_core::Error> for CliError {
    fn from(e: sve_core::Error) -> Self {
        use sve_core::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidArgument(_)
            | E::OutOfRange { .. }
            | E::UnsupportedScheme(_)
            | E::MissingGradient(_) => CliError::Validation(msg),
            E::NoConvergence { .. } => CliError::NoConvergence(msg),
            E::OracleFailure(_) => CliError::Oracle(msg),
            E::CovarianceFailure(_) => CliError::Runtime(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
