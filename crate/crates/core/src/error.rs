use thiserror::Error;

/// Errors produced by the simulator and analytic engines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A waveform has the wrong number of samples for the modulation.
    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// Adaptive quadrature could not reach the requested tolerance.
    /// Carries the best estimate so callers can decide what to do with it.
    #[error(
        "quadrature did not converge: best estimate {best_estimate}, error bound {error_bound}"
    )]
    QuadratureNonConvergence {
        best_estimate: f64,
        error_bound: f64,
    },

    /// An evaluation was refused because its cost estimate exceeds the
    /// configured budget. Never silently truncates work instead.
    #[error("evaluation budget exceeded: {required} cells required, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
