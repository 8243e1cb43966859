use thiserror::Error;

/// Coarse classification used by front ends to map failures onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Invariant,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("evaluation of {component} produced a non-finite value at x = {point:?}")]
    Evaluation { component: &'static str, point: Vec<f64> },

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("policy iteration cycled: {0}")]
    Cycling(String),

    #[error("state blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("insufficient survivors: {0}")]
    InsufficientSurvivors(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Evaluation { .. }
            | Error::IterationLimit { .. }
            | Error::Cycling(_)
            | Error::BlowUp { .. }
            | Error::InsufficientSurvivors(_) => ErrorKind::Numerical,
            Error::Invariant(_) | Error::Internal(_) => ErrorKind::Invariant,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
