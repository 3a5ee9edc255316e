use thiserror::Error;

/// Crate-wide error type. Variants are grouped by what went wrong rather than
/// by module so that the CLI can map them onto exit codes.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A constructor or operation received a parameter outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// An evaluation point lies outside the support of the relevant law.
    #[error("argument outside support: {0}")]
    OutOfSupport(String),

    /// The requested computation is not covered by the model assumptions
    /// (mismatched tail indices, capital split not summing to one, ...).
    #[error("model assumption violated: {0}")]
    AssumptionViolation(String),

    /// Adaptive quadrature could not reach the requested tolerance.
    #[error("quadrature failed to converge: {0}")]
    QuadratureFailure(String),

    /// A Monte Carlo estimate is degenerate (no information in the sample).
    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    /// `merge` was called with no estimates.
    #[error("cannot merge an empty list of estimates")]
    EmptyMerge,
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
