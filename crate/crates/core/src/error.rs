use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum VomcError {
    #[error("invalid alphabet size {0} (must be in 2..=255)")]
    InvalidAlphabet(usize),

    #[error("symbol {symbol} out of range for alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("depth {depth} too large for alphabet {alphabet}")]
    DepthTooLarge { depth: usize, alphabet: usize },

    #[error("context holds {have} symbols but {need} are required")]
    InsufficientContext { have: usize, need: usize },

    #[error("model invariant violated: {0}")]
    ModelInvariant(String),

    #[error("enumeration refused: {count} trees exceeds the limit of {limit}")]
    EnumerationTooLarge { count: u128, limit: u128 },

    #[error("predictor emitted an invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("zero-frequency symbol {0} after quantization")]
    ZeroFrequency(usize),

    #[error("bad container magic")]
    BadMagic,

    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),

    #[error("truncated stream: {0}")]
    Truncated(&'static str),

    #[error("unknown predictor `{0}`")]
    UnknownPredictor(String),

    #[error("unknown predictor id {0}")]
    UnknownPredictorId(u8),

    #[error("unknown feature variant `{0}`")]
    UnknownVariant(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mismatched configurations: {0}")]
    ConfigMismatch(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = VomcError> = std::result::Result<T, E>;
