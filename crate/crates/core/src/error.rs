use thiserror::Error;

pub type Result<T> = std::result::Result<T, SncError>;

#[derive(Debug, Error)]
pub enum SncError {
    #[error("set handle {handle} out of range (m = {m})")]
    InvalidHandle { handle: usize, m: usize },

    #[error("element {element} out of range (n = {n})")]
    ElementOutOfRange { element: usize, n: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Exact membership testing enumerates 2^f subcollections; refuse beyond the cap.
    #[error(
        "element {element} lies in {frequency} sets, above the exact-checker cap of {cap}; \
         use a domain oracle (e.g. --oracle interval)"
    )]
    FrequencyCap {
        element: usize,
        frequency: usize,
        cap: usize,
    },

    /// No tau-SNC element exists in the residual set.
    #[error("instance is not {tau}-SNC: residual set of {} elements has no {tau}-SNC element", residual.len())]
    NotSnc { tau: usize, residual: Vec<usize> },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("search capacity exceeded: {0}")]
    CapacityExceeded(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
