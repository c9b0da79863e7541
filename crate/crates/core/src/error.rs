use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: family has d={expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid truncation range {0}: must be at least 1")]
    InvalidTruncation(u64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("insufficient support: found {found} of {wanted} indices with value above {threshold} below scan bound {bound}")]
    InsufficientSupport {
        found: usize,
        wanted: usize,
        threshold: f64,
        bound: u64,
    },

    #[error("no axis/sign projection has infinite support above {threshold} (tried axis {axis}, sign {sign})")]
    NoInfiniteProjection {
        axis: usize,
        sign: char,
        threshold: f64,
    },

    #[error("family has unbounded support; a finite truncation range is required")]
    UnboundedSupport,

    #[error("frontier overflow: {size} vertices exceed cap {cap} at layer {layer}")]
    FrontierOverflow { size: usize, cap: usize, layer: u64 },

    #[error("m={m} exceeds n={n} in binomial tail")]
    BinomialRange { n: u64, m: u64 },

    #[error("coarse vertex ({i},{j}) violates the parity constraint i+j even")]
    Parity { i: i64, j: i64 },

    #[error("replica count must be at least 1")]
    NoReplicas,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("window too large: {events} events exceed cap {cap}")]
    WindowTooLarge { events: usize, cap: usize },

    #[error("query outside sampled window: {0}")]
    OutOfWindow(String),

    #[error("slab {slab} out of range (sample horizon {horizon})")]
    SlabOutOfRange { slab: u64, horizon: f64 },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("trace format error on line {line}: {reason}")]
    TraceFormat { line: usize, reason: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
