use thiserror::Error;

/// Errors produced by queue construction, stationary solving, and
/// simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A probability or count parameter lies outside its legal range.
    #[error("{name} must be within [{min}, {max}], got {value}")]
    ParameterRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// Finite capacities must hold at least one packet.
    #[error("capacity must be at least 1 packet")]
    ZeroCapacity,

    /// The requested operation is only defined for finite buffers.
    #[error("operation requires a finite capacity")]
    UnboundedCapacity,

    /// The stationary computation did not reach the requested residual.
    #[error("stationary residual {achieved:.3e} exceeds tolerance {tol:.3e}")]
    NotConverged { tol: f64, achieved: f64 },

    /// The linear system for the stationary distribution has no unique
    /// solution; the chain violates the single-recurrent-class precondition.
    #[error("stationary system is singular")]
    SingularSystem,

    /// The solver produced a negative probability beyond the clamping
    /// tolerance.
    #[error("stationary entry pi[{index}] = {value:.3e} is negative beyond tolerance")]
    NegativeProbability { index: usize, value: f64 },

    /// Simulation configuration is internally inconsistent.
    #[error("invalid simulation config: {reason}")]
    InvalidSimConfig { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
