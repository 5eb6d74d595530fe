//! Command-line front end: configuration loading, the commands behind the
//! `floquet` binary, deterministic JSON and CSV output.

pub mod commands;
pub mod config;
pub mod json;

use thiserror::Error;

use crate::floquet::FloquetError;
use crate::lyapunov::LyapunovError;
use crate::spectral::SpectralError;
use crate::timescale::TimeScaleError;
use crate::transition::TransitionError;

pub use commands::{analyze, decompose, periodic, simulate, transform, verify, CommandOutput};
pub use config::{Problem, SystemConfig, Tolerances};

pub const REPORT_SCHEMA: &str = "floquet-report/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration or arguments.
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    /// The analysis itself failed.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

macro_rules! numeric {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Numeric(e.to_string())
            }
        }
    )*};
}

numeric!(FloquetError, TransitionError, LyapunovError, SpectralError, TimeScaleError, crate::hilger::HilgerError, crate::error::Error);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
