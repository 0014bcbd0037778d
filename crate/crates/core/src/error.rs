use thiserror::Error;

/// Errors raised by the optimizer and its building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A Gaussian kernel collapsed (zero scale or zero signal coefficient).
    #[error("degenerate kernel at t={t}: {reason}")]
    DegenerateKernel { t: f64, reason: &'static str },

    /// Score conversion requested where the interpolant makes it singular.
    #[error("singular scale at t={t}: {reason}")]
    SingularScale { t: f64, reason: &'static str },

    /// No candidate in the pool satisfied the constraints.
    #[error("no feasible point among {pool_size} candidates")]
    EmptyFeasible { pool_size: usize },

    #[error("training diverged at step {step} (loss {loss})")]
    TrainingDiverged { step: usize, loss: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    /// The outer loop stopped at `scale`; the trace emitted so far stays valid.
    #[error("aborted at scale {scale}: {source}")]
    Aborted {
        scale: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
