use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cover relation contains a cycle through `{0}`")]
    Cycle(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("{what} has size {size}, above the cap of {cap}")]
    Size { what: String, size: usize, cap: usize },
    #[error("image of `{0}` is not downward closed")]
    NotACut(String),
    #[error("image of `{0}` is not contained in its strict past")]
    NotStrict(String),
    #[error("iterating the causality function stalls at a nonempty cut")]
    NotFinite,
    #[error("objects belong to different posets")]
    PosetMismatch,
    #[error("split does not partition the modes of wire `{0}`")]
    NotAPartition(String),
    #[error("occupation with {photons} photons exceeds truncation {cap} on wire `{wire}`")]
    TruncationExceeded { wire: String, photons: usize, cap: usize },
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("map is not completely positive (minimum eigenvalue {0:e})")]
    NotCp(f64),
    #[error("map is not trace preserving (residual {0:e})")]
    NotTp(f64),
    #[error("map is not trace non-increasing (minimum eigenvalue {0:e})")]
    NotTni(f64),
    #[error("wire name `{0}` used twice")]
    NameCollision(String),
    #[error("`{0}` is not a factor of the output space")]
    NotAFactor(String),
    #[error("causality violated on cut {cut:?} (residual {residual:e})")]
    CausalityViolation { cut: Vec<String>, residual: f64 },
    #[error("operation requires a normalized box")]
    NotNormalized,
    #[error("stage isometry extraction failed (residual {0:e})")]
    ExtractionFailure(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid pairing: {0}")]
    InvalidPairing(String),
    #[error("cut sequence is not ascending at index {0}")]
    NotAscending(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
