//! Crate-wide error type.
//!
//! Numerical failure modes (singular factorizations, degenerate rank-one
//! updates, poles in problem evaluations, ...) are reported as values so the
//! solver can turn them into terminal run statuses instead of unwinding.
//! Shape mismatches, by contrast, are programming errors and panic.

use thiserror::Error;

/// Errors produced by the numerical kernels, problem evaluations and
/// theory-side evaluators.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// A factorization or solve met a pivot (or singular value) too small to
    /// trust relative to the matrix scale.
    #[error("matrix is numerically singular: {0}")]
    SingularMatrix(String),

    /// An iterative kernel exhausted its iteration budget.
    #[error("iteration failed to converge: {0}")]
    NonConvergence(String),

    /// A secant direction (or difference vector) had essentially zero norm,
    /// so the rank-one update is undefined.
    #[error("update direction has near-zero norm")]
    ZeroDirection,

    /// A rank-one inverse update had a denominator too small relative to the
    /// operand scales.
    #[error("rank-one update is numerically degenerate: {0}")]
    DegenerateUpdate(String),

    /// A problem evaluation left its domain of definition.
    #[error("function evaluation hit a pole: {0}")]
    PoleEncountered(String),

    /// A bound evaluator was asked below its validity threshold; `min_k` is
    /// the smallest admissible iteration index.
    #[error("bound is only valid for iteration counts >= {min_k}, got {k}")]
    ThresholdNotMet { k: usize, min_k: usize },

    /// An argument fell outside the mathematical domain of the formula.
    #[error("argument outside the domain of validity: {0}")]
    OutOfDomain(String),

    /// The initialization constraints admit no feasible rate constant.
    #[error("initialization constraints are infeasible: {0}")]
    Infeasible(String),

    /// A value expected to be finite was NaN or infinite.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// A run or experiment configuration is not constructible.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Filesystem failure while reading or writing artifacts.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// A JSON document failed to serialize or deserialize.
    #[error("malformed JSON document: {0}")]
    Json(#[from] serde_json::Error),

    /// A CSV trace or table failed to parse.
    #[error("malformed table: {0}")]
    Parse(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
