//! Error type shared by every module of the engine.

use thiserror::Error;

/// Failure modes of weight evaluation, amplitude computation, chain
/// construction, root finding and verification.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BetheError {
    /// A `table` model was evaluated at a pair of rapidities it does not store.
    #[error("no stored weights for (lambda, mu) = ({lambda}, {mu})")]
    UnknownGridPoint { lambda: String, mu: String },

    /// A weight function was evaluated outside its domain (pole or non-finite value).
    #[error("parameter outside the model domain: {0}")]
    ParameterDomain(String),

    /// A denominator or pivot vanished at the requested evaluation point.
    #[error("singular evaluation: {0}")]
    Singularity(String),

    /// An index tuple lies outside the admissible range of the requested object.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A weight entry violates the ice rule a+b = c+d.
    #[error("ice rule violated at entry (a,b,c,d) = ({a},{b},{c},{d})")]
    IceRuleViolation { a: usize, b: usize, c: usize, d: usize },

    /// The requested particle sector contains no states.
    #[error("sector n = {n} is empty for N = {states}, L = {length}")]
    EmptySector { n: usize, states: usize, length: usize },

    /// Newton iteration failed to reach the requested tolerance.
    #[error("Newton iteration did not converge (best residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },

    /// The finite-difference Jacobian could not be inverted.
    #[error("singular Jacobian in Newton iteration")]
    SingularJacobian,

    /// A dense operation was requested on a Hilbert space above the dense limit.
    #[error("dimension {dim} exceeds the dense limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    /// Too many parameter samples hit singular points.
    #[error("degenerate parameters: {skipped} of {total} samples skipped")]
    DegenerateParameters { skipped: usize, total: usize },

    /// A command-line or library option has an unusable value.
    #[error("invalid option: {0}")]
    InvalidOption(String),

    /// A configuration or table file could not be parsed.
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    /// Filesystem failure while reading inputs or writing reports.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for BetheError {
    fn from(err: std::io::Error) -> Self {
        BetheError::Io(err.to_string())
    }
}

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, BetheError>;
