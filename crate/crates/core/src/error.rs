use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("multivalued stream function; subtract flux carrier first (flux = {flux:e})")]
    MultivaluedStream { flux: f64 },

    #[error("field is not solenoidal: divergence residual {residual:e}")]
    NotSolenoidal { residual: f64 },

    #[error("inadmissible boundary data: flux through inner circle {inner:e}, through outer circle {outer:e}")]
    Inadmissible { inner: f64, outer: f64 },

    #[error("invalid boundary data: {0}")]
    InvalidBoundary(String),

    #[error("boundary data has angular mode {mode}, grid resolves only up to {max}")]
    UnresolvedTrace { mode: usize, max: usize },

    #[error("linear solve failed for angular mode {mode}")]
    LinearSolve { mode: usize },

    #[error("singular Jacobian at lambda = {lambda}, flux = {flux}")]
    SingularJacobian { lambda: f64, flux: f64 },

    #[error("pressure gradient not integrable: curl defect {defect:e}")]
    NonIntegrable { defect: f64 },

    #[error("nothing to normalize: Dirichlet norm is zero")]
    ZeroNorm,

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("spiral flow exponent collides with the 1/r branch (c/nu = -2); logarithmic branch unsupported")]
    SpiralResonance,

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
