//! Crate-wide error type for callers that do not care which stage failed.

use thiserror::Error;

use crate::expr::{EvalError, ParseError};
use crate::floquet::FloquetError;
use crate::hilger::HilgerError;
use crate::lyapunov::LyapunovError;
use crate::spectral::SpectralError;
use crate::timescale::TimeScaleError;
use crate::transition::TransitionError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    TimeScale(#[from] TimeScaleError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Hilger(#[from] HilgerError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
}

pub type Result<T> = std::result::Result<T, Error>;
