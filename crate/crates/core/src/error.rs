use thiserror::Error;

/// Errors produced by wassfit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A hyperrectangle with a non-positive (or non-finite) width.
    #[error("degenerate box: lo[{dim}] = {lo} is not below hi[{dim}] = {hi}")]
    DegenerateBox { dim: usize, lo: f64, hi: f64 },

    /// Two boxes of a density have intersecting interiors.
    #[error("boxes {first} and {second} overlap")]
    OverlappingBoxes { first: usize, second: usize },

    /// A mass or demand vector does not sum to one.
    #[error("{what} does not sum to 1 (sum = {sum})")]
    NotNormalized { what: &'static str, sum: f64 },

    /// Two samples coincide.
    #[error("samples {first} and {second} coincide")]
    DuplicateSamples { first: usize, second: usize },

    /// Catch-all for malformed inputs.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An index outside `0..len`.
    #[error("index {index} out of range for {len} cells")]
    IndexOutOfRange { index: usize, len: usize },

    /// Exact polytope volumes are only implemented in low dimension.
    #[error("exact volumes are supported for dimension <= 3, got {0}")]
    UnsupportedDimension(usize),

    /// The reference-set scale `s` is zero.
    #[error("minimum separation s is zero; smoothness constant undefined")]
    DegenerateSeparation,

    /// Estimator denominator is not positive.
    #[error("closed-form denominator is not positive ({0})")]
    DegenerateDenominator(f64),

    /// A quantity that must be finite is not.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// A computation would exceed the configured size guard.
    #[error("problem too large: {0}")]
    TooLarge(String),

    /// Malformed CNF input.
    #[error("invalid CNF: {0}")]
    InvalidCnf(String),
}

pub type Result<T> = std::result::Result<T, Error>;
