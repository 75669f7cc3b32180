//! Error type shared by all jetkt-core modules.

use thiserror::Error;

/// Errors reported by algebraic and homological operations.
///
/// Variants are grouped by family: structural mismatches between operands,
/// invalid equation systems, and computations that are rejected rather than
/// silently truncated.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Operands were built over different variable declarations.
    #[error("jet context mismatch: {0}")]
    ContextMismatch(String),

    /// A symbol index is outside the declared ranges of its context.
    #[error("unknown symbol: {0}")]
    UnknownSymbol(String),

    /// A substitution or section component has the wrong parity.
    #[error("parity mismatch: {0}")]
    ParityMismatch(String),

    /// Operator shapes do not line up for composition or application.
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    /// An equation is not in solved form (left side must be a single jet symbol).
    #[error("equation {index} is not in solved form: {reason}")]
    NotSolvedForm { index: usize, reason: String },

    /// Two equations share a leading symbol, or one leading is a derivative of another.
    #[error("leading symbols overlap: {0}")]
    LeadingOverlap(String),

    /// A right-hand side still contains a principal symbol.
    #[error("equation {index} is not autoreduced: right side contains principal symbol {symbol}")]
    NotAutoreduced { index: usize, symbol: String },

    /// Cross-derivative reduction of two equations disagrees.
    #[error("non-confluent pair at {symbol}: one reduction order gives {first}, another gives {second}")]
    NonConfluent {
        symbol: String,
        first: String,
        second: String,
    },

    /// Reduction failed to terminate within the step budget; the system is ill-ranked.
    #[error("reduction did not terminate within {steps} steps (ill-ranked system?)")]
    NonTerminating { steps: usize },

    /// Compatibility-operator validation failed when assembling a Koszul-Tate setup.
    #[error("compatibility validation failed: {0}")]
    CompatibilityFailure(String),

    /// A truncation window is too small for the requested computation.
    #[error("truncation window too small: {0}")]
    TruncationTooSmall(String),

    /// A search or solve was asked for with an empty ansatz.
    #[error("empty ansatz: {0}")]
    EmptyAnsatz(String),

    /// A certificate precondition failed (e.g. the on-shell identity is violated).
    #[error("certificate rejected: {0}")]
    CertificateRejected(String),

    /// A current fails its divergence check, so no cosymmetry can be extracted.
    #[error("current is not conserved: residual {0}")]
    NotConserved(String),

    /// A section fails the on-shell adjoint-linearization equation.
    #[error("not a cosymmetry: {0}")]
    NotCosymmetry(String),

    /// An operation restricted to normal equations received a reducible setup.
    #[error("not a normal equation: {0}")]
    NotNormalEquation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
