use thiserror::Error;

/// Errors raised by the pricing library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    /// A price or rate outside the admissible range of a demand curve.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed instance, policy, weights or configuration.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The instance is outside the admissible family (non-concave profit rate,
    /// or an unsupported demand/weight combination).
    #[error("rejected instance: {0}")]
    Rejected(String),

    /// Value iteration did not reach the span tolerance.
    #[error("value iteration did not converge after {iterations} iterations (span {span:e}, tolerance {tolerance:e})")]
    Convergence {
        iterations: usize,
        span: f64,
        tolerance: f64,
    },

    /// A converged solution violates the monotone structure of optimal rates.
    #[error("optimal rates are not monotone: {0}")]
    Structure(String),

    /// Brute-force grid larger than the evaluation budget.
    #[error("grid of {evaluations} evaluations exceeds the limit of {limit}")]
    GridTooLarge { evaluations: f64, limit: f64 },
}

pub type Result<T, E = PricingError> = std::result::Result<T, E>;
