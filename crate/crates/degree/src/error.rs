use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two tensors (or a tensor and a parameter set) disagree on shape.
    /// Carries both shapes so the message pinpoints the offending operation.
    #[error("{op}: shape mismatch, expected {expected}, got {actual}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A gradient or parameter turned non-finite; the optimizer aborts the
    /// step so the previous parameters stay intact.
    #[error("non-finite value in {context} (first offending index {index})")]
    NonFinite { context: String, index: usize },

    /// A forward trace was produced by an older parameter version and can no
    /// longer be back-propagated through the current network.
    #[error("stale trace: produced at parameter version {trace}, network is at {network}")]
    StaleTrace { trace: u64, network: u64 },

    /// Malformed or mismatched on-disk artifact (checkpoint, patch set).
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn format(path: impl ToString, reason: impl ToString) -> Self {
        Error::Format {
            path: path.to_string(),
            reason: reason.to_string(),
        }
    }
}
