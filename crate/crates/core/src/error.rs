use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    Dimension { expected: (usize, usize), found: (usize, usize) },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed data at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("video segmenter used before the first prompt")]
    NotPrompted,

    #[error("cannot rewind to frame {requested}: retained history is {oldest}..={newest}")]
    RewindOutOfHistory { requested: usize, oldest: usize, newest: usize },

    #[error("frame source is not monotone: expected frame {expected}, got {found}")]
    NonMonotoneSource { expected: usize, found: usize },

    #[error("bridge protocol error: {0}")]
    Protocol(String),

    #[error("remote model error: {0}")]
    Remote(String),

    #[error("bridge request timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(offset: usize, msg: impl Into<String>) -> Self {
        Error::Format { offset, message: msg.into() }
    }

    /// Whether the error stems from bad user input (as opposed to a model or
    /// transport failure at runtime).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::InvalidArgument(_)
                | Error::Format { .. }
                | Error::Scenario { .. }
                | Error::NonMonotoneSource { .. }
                | Error::Io(_)
        )
    }
}

pub(crate) fn check_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
