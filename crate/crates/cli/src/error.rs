use thiserror::Error;

/// Failures surfaced by the command line, each with a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<volterra::Error> for CliError {
    fn from(e: volterra::Error) -> Self {
        use volterra::Error as E;
        match e {
            E::Io(e) => CliError::Io(e),
            E::Csv(e) => e.into(),
            E::InvalidArgument(_) | E::InvalidGrid(_) | E::Parse(_) | E::InsufficientData { .. } => {
                CliError::Config(e.to_string())
            }
            E::IllConditioned { .. }
            | E::InvalidModel(_)
            | E::IndistinguishableHypotheses
            | E::InvalidRule(_)
            | E::UnboundedBound(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if !e.is_io_error() {
            return CliError::Config(e.to_string());
        }
        match e.into_kind() {
            csv::ErrorKind::Io(e) => CliError::Io(e),
            _ => unreachable!("checked above"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
