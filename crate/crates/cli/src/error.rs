use std::fmt;

use spacefill::Error;

/// Process exit status for an invalid configuration or input file.
pub const EXIT_CONFIG: i32 = 2;
/// Process exit status for a failure while running.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Library module that raises each error variant.
pub fn module_of(err: &Error) -> &'static str {
    match err {
        Error::InvalidBox(_) => "core",
        Error::InvalidConfig(_) | Error::BandwidthTooLarge { .. } => "engine",
        Error::MissingInitialDensity => "engine",
        Error::NonFiniteJacobian { .. } | Error::MissingDifferential => "models",
        Error::NoSteadyState { .. } | Error::Model(_) => "models",
        Error::DuplicateImages { .. } | Error::AllZeroWeights => "resample",
        Error::StallGuard { .. } => "perturb",
        Error::SizeMismatch { .. } | Error::TooLarge { .. } => "transport",
        Error::EnvelopeViolation { .. } => "oracle",
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let msg = format!("{}: {err}", module_of(&err));
        match err {
            Error::InvalidBox(_)
            | Error::InvalidConfig(_)
            | Error::BandwidthTooLarge { .. }
            | Error::MissingInitialDensity => CliError::Config(msg),
            _ => CliError::Runtime(msg),
        }
    }
}
