use thiserror::Error;

/// Errors raised by network construction, solving and the analyses built on top.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("branch {from}-{to} has zero impedance")]
    ZeroImpedanceBranch { from: usize, to: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("power flow did not converge after {iterations} iterations (mismatch {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("fleet {fleet} leaves the road at step {step} (node {node} outside 1..={nodes})")]
    PositionOutOfRange {
        fleet: usize,
        step: usize,
        node: i64,
        nodes: usize,
    },

    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Monte Carlo sample {sample} (seed {seed}) failed at step {step}: {source}")]
    SampleFailed {
        sample: usize,
        seed: u64,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("continuation stalled near length {length_km:.6} km (step {step:.3e})")]
    TraceStall { length_km: f64, step: f64 },

    #[error("no fold found below {max_km} km")]
    NoFold { max_km: f64 },

    #[error("no steady-state solution with a single vehicle on a {length_km} km road")]
    InfeasibleAtOne { length_km: f64 },

    #[error("two-bus case has no real solution (discriminant {discriminant:.3e})")]
    NoSolution { discriminant: f64 },
}

impl Error {
    /// True for errors that mean "no operating point was found".
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::SingularJacobian { .. } => true,
            Error::StepFailed { source, .. } | Error::SampleFailed { source, .. } => {
                source.is_non_convergence()
            }
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
