use thiserror::Error;

/// Errors raised by the estimators and their supporting kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("net of {required} points exceeds the configured cap {cap}")]
    NetTooLarge { required: u128, cap: usize },

    #[error("generator index {index} out of range for {count} generators")]
    LetterOutOfRange { index: usize, count: usize },

    #[error("generator {generator} ({kind}) cannot act on {space}")]
    IncompatibleGenerator {
        generator: usize,
        kind: String,
        space: String,
    },

    #[error("enumeration budget exceeded at depth {depth}: {required} > {budget}")]
    BudgetExceeded {
        depth: usize,
        required: u128,
        budget: u128,
    },

    #[error("model mesh {mesh} is too coarse for epsilon {epsilon} (needs <= {limit})")]
    MeshTooCoarse { mesh: f64, epsilon: f64, limit: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("family is not a cover: point {point} is uncovered")]
    NotACover { point: usize },

    #[error("exact search over {size} points exceeds the cap {cap}")]
    OracleCapExceeded { size: usize, cap: usize },

    #[error("empty model")]
    EmptyModel,

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
