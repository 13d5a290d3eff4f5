use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not unimodular: |det - 1| = {deviation:e}")]
    NotUnimodular { deviation: f64 },

    #[error("matrix is not trace-free: |trace| = {trace:e}")]
    NotTraceFree { trace: f64 },

    #[error("point must lie in the upper half-plane, got y = {0}")]
    NonPositiveHeight(f64),

    /// The working precision cannot certify the requested tolerance; the
    /// caller should retry with more bits.
    #[error("precision exhausted at {precision_bits} bits: error bound 2^{log2_error:.1} exceeds tolerance")]
    PrecisionExhausted {
        precision_bits: usize,
        log2_error: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empirical measure is empty")]
    EmptyMeasure,

    #[error("dictionary mismatch: measure has {measure} functions, reference has {reference}")]
    DictionaryMismatch { measure: usize, reference: usize },

    #[error("orbit arrays too short: need {needed} values, got {got}")]
    InsufficientLength { needed: usize, got: usize },

    #[error("index set has empty horizon")]
    EmptyHorizon,

    #[error("matrix is not nilpotent")]
    NotNilpotent,

    #[error("nilpotent element is zero")]
    ZeroNilpotent,

    #[error("ad(H) has non-integer spectrum; not an sl2-triple")]
    NonIntegerSpectrum,

    #[error("linear system has no solution: {0}")]
    Inconsistent(String),

    #[error("subalgebra basis is empty")]
    EmptyBasis,

    #[error("direction is centralized by the unipotent subgroup (d_h = 0)")]
    Centralized,

    #[error("sequence stays bounded in G/H (largest singular value {max_sigma})")]
    BoundedSequence { max_sigma: f64 },

    #[error("angle condition unsolvable: alpha / t^2 = {ratio} exceeds 1 at index {index}")]
    TimesTooSmall { index: usize, ratio: f64 },

    #[error("displacement {d} is at least the ball diameter {diameter}; ratio saturates at 2")]
    Saturated { d: f64, diameter: f64 },
}
