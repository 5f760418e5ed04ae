use thiserror::Error;

/// Errors produced by the coding library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sequence is empty")]
    EmptySequence,

    #[error("letter {letter} is outside the alphabet of size {alphabet_size}")]
    InvalidLetter { letter: usize, alphabet_size: usize },

    #[error("statistic {0:?} lies outside the convex hull of the letter statistics")]
    OutsideHull(Vec<f64>),

    #[error("maximum-likelihood solver did not converge after {iterations} iterations (projected gradient {gradient:e}, theta {theta:?})")]
    NoConvergence {
        iterations: usize,
        gradient: f64,
        theta: Vec<f64>,
    },

    #[error("length {length} needs {compositions} letter compositions, above the cap of {cap}; use a smaller length or alphabet")]
    CountingCap {
        length: usize,
        compositions: u128,
        cap: u128,
    },

    #[error("dictionary would exceed {cap} leaves (reached depth {depth})")]
    LeafCapExceeded { cap: u64, depth: usize },

    #[error("dictionary size {size} must be at least the alphabet size {alphabet_size}")]
    DictionaryTooSmall { size: u64, alphabet_size: usize },

    #[error("stream ended after {consumed} letters before reaching a segment")]
    StreamExhausted { consumed: usize },

    #[error("segment index {index} out of range for a dictionary of {size} segments")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("malformed dictionary: {0}")]
    MalformedDictionary(String),

    #[error("fixed-point iteration diverged: {0}")]
    Divergence(String),

    #[error("degenerate source: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short stable tag for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::EmptySequence => "empty_sequence",
            Error::InvalidLetter { .. } => "invalid_letter",
            Error::OutsideHull(_) => "outside_hull",
            Error::NoConvergence { .. } => "no_convergence",
            Error::CountingCap { .. } => "counting_cap",
            Error::LeafCapExceeded { .. } => "leaf_cap_exceeded",
            Error::DictionaryTooSmall { .. } => "dictionary_too_small",
            Error::StreamExhausted { .. } => "stream_exhausted",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::MalformedDictionary(_) => "malformed_dictionary",
            Error::Divergence(_) => "divergence",
            Error::Degenerate(_) => "degenerate",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}
