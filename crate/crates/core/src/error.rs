use thiserror::Error;

/// Errors raised by the simulation, extrapolation and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation would exceed a configured evaluation budget.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// The principal matrix logarithm is ambiguous because an eigenphase sits on the branch cut.
    #[error("branch ambiguity: {0}")]
    BranchAmbiguity(String),

    #[error("ill-conditioned fit ({context}): condition number {condition:.3e}")]
    FitFailure { context: String, condition: f64 },

    #[error("Richardson node collision for m={m}, r_scale={r_scale}")]
    NodeCollision { m: usize, r_scale: u64 },

    #[error("conditioning check failed: {0}")]
    Conditioning(String),

    #[error("finite-difference stencil degenerate: {0}")]
    StencilDegeneracy(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
