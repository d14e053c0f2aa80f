//! Error kinds and the process exit codes they map to.

use std::fmt;

use dropf_core::netmodel::NetworkError;
use dropf_core::opf::OpfError;
use dropf_core::powerflow::PowerFlowError;
use dropf_core::simharness::SimError;
use dropf_core::uncertainty::UncertaintyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Infeasible problem or invalid network content.
    Domain,
    /// Unreadable, malformed or inconsistent input.
    Input,
    /// Numerical failure of a solver.
    Solver,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Domain => 1,
            ErrorKind::Input => 2,
            ErrorKind::Solver => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> CliError {
        CliError { kind, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> CliError {
        CliError::new(ErrorKind::Input, message)
    }

    pub fn domain(message: impl Into<String>) -> CliError {
        CliError::new(ErrorKind::Domain, message)
    }

    pub fn solver(message: impl Into<String>) -> CliError {
        CliError::new(ErrorKind::Solver, message)
    }

    /// Prefixes the message with where the error happened.
    pub fn context(self, what: impl fmt::Display) -> CliError {
        CliError { message: format!("{what}: {}", self.message), ..self }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<PowerFlowError> for CliError {
    fn from(e: PowerFlowError) -> Self {
        match e {
            PowerFlowError::Network(n) => n.into(),
            PowerFlowError::Dimension(_) => CliError::input(e.to_string()),
            _ => CliError::solver(e.to_string()),
        }
    }
}

impl From<UncertaintyError> for CliError {
    fn from(e: UncertaintyError) -> Self {
        match e {
            UncertaintyError::MarginCollapse { .. } => CliError::domain(e.to_string()),
            UncertaintyError::PowerFlow(p) => p.into(),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<OpfError> for CliError {
    fn from(e: OpfError) -> Self {
        match e {
            OpfError::Solver(_) | OpfError::NotExact(_) => CliError::solver(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::PowerFlow { minute, source } => CliError::from(source).context(format!("simulation aborted at minute {minute}")),
            SimError::Network(n) => n.into(),
            SimError::Uncertainty(u) => u.into(),
            SimError::Device(_) | SimError::Config(_) | SimError::Forecast(_) => CliError::input(e.to_string()),
        }
    }
}
