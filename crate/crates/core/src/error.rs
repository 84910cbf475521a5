use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular value decomposition failed: {0}")]
    SvdFailed(String),

    #[error("power iteration did not converge after {0} iterations")]
    PowerIteration(usize),

    #[error("bisection bracket failure: {0}")]
    Bracket(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("learned reconstruction method has no network parameters")]
    MissingParams,

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of a numerical routine (as opposed to bad input or I/O).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::SvdFailed(_)
                | Error::PowerIteration(_)
                | Error::Bracket(_)
                | Error::DegenerateFit(_)
                | Error::Diverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
