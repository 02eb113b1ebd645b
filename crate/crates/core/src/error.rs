use thiserror::Error;

use crate::ocp::OcpSolution;
use crate::record::RunRecord;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// No restart met the terminal tolerance. Carries the best solution found
    /// so the caller can inspect it or retry with a longer horizon.
    #[error("solver failure: terminal violation {violation:.3e} exceeds tolerance {tolerance:.1e}")]
    SolverFailure {
        violation: f64,
        tolerance: f64,
        best: Box<OcpSolution>,
    },

    /// The failure branch of a measurement was requested for a state that
    /// (numerically) lies entirely inside the reference projector.
    #[error("degenerate measurement: success probability {probability} leaves no orthogonal component")]
    DegenerateMeasurement { probability: f64 },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    /// A closed-loop run stopped early; the record holds every completed step.
    #[error("run aborted at step {step}: {source}")]
    RunAborted {
        step: usize,
        #[source]
        source: Box<Error>,
        partial: Box<RunRecord>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
