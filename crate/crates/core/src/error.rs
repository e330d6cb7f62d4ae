use thiserror::Error;

/// Errors raised by the spectral toolkit.
///
/// Everything here is a contract violation of some preconditions, not a
/// recoverable runtime condition: callers normally either fix the allocation
/// or the quadrature order and retry.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Applying an operator would push coefficients past the allocation.
    /// Truncated results would silently break every exactness identity, so
    /// this is always an error, never a warning.
    #[error("operator application spills: support {support} + band growth {growth} exceeds allocation {alloc}")]
    Spill {
        support: usize,
        growth: usize,
        alloc: usize,
    },

    /// A quadrature rule is too small for the requested projection width.
    #[error("quadrature order {order} too small: need at least {required}")]
    QuadratureTooSmall { order: usize, required: usize },

    /// `truncate_declared` below the actual support.
    #[error("cannot declare support {requested}: coefficient {nonzero_at} is nonzero")]
    TruncateBelowSupport { requested: usize, nonzero_at: usize },

    /// Padding below the current allocation or other size mismatches.
    #[error("allocation {alloc} too small, need {required}")]
    AllocTooSmall { alloc: usize, required: usize },

    /// A sequence formula was evaluated at an index where a ratio base is
    /// non-positive under a non-integer power.
    #[error("sequence {family} undefined at n = {n} for non-integer exponent (base {base} <= 0)")]
    SequenceDomain {
        family: &'static str,
        n: u64,
        base: i64,
    },

    /// A sampled multiplier is missing its derivative-bound metadata.
    #[error("sampled multiplier '{0}' carries no derivative bound; the p = 0 oracle requires one")]
    MissingDerivativeBound(String),

    /// A polynomial multiplier of degree two or more has unbounded
    /// derivatives and falls outside the inequality's multiplier class.
    #[error("polynomial multiplier of degree {degree} has unbounded derivatives")]
    UnboundedDerivative { degree: usize },

    /// The symmetric eigensolver did not converge or produced non-finite
    /// values.
    #[error("eigensolver failure: {0}")]
    Eigen(String),

    /// Parse failure of the plain-text coefficient format.
    #[error("coefficient parse error at line {line}: {msg}")]
    CoeffParse { line: usize, msg: String },

    /// An operation that requires affine multipliers got something else.
    #[error("{0} requires affine multipliers")]
    AffineRequired(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
