use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid transition kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("chain is not irreducible")]
    NotIrreducible,

    #[error("chain is periodic with period {period}")]
    Periodic { period: usize },

    #[error("stationary distribution did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("spectral expansion {lambda} is not below 1")]
    SpectralGapViolation { lambda: f64 },

    #[error("mixing horizon exceeded after {cap} steps")]
    HorizonExceeded { cap: usize },

    #[error("initial distribution puts mass on state {state} outside the stationary support")]
    AbsoluteContinuityViolation { state: usize },

    #[error("feature gram matrix is degenerate (lambda_0 = {lambda0:e})")]
    DegenerateFeatures { lambda0: f64 },

    #[error("TD matrix A is singular")]
    SingularA,

    #[error("TD iterate overflowed at step {step}")]
    NumericalOverflow { step: u64 },

    #[error("covariance series not truncated within {cap} lags")]
    TruncationFailure { cap: usize },

    #[error("linear system ill-conditioned (condition number {cond:e})")]
    IllConditioned { cond: f64 },

    #[error("fundamental matrix (I - P + 1 mu^T) is singular")]
    SingularFundamentalMatrix,

    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("quadratic-variation deficit is not PSD (min eigenvalue {min_eig:e}); increase kappa")]
    DeficitNotPsd { min_eig: f64 },

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("rate grid is degenerate: {0}")]
    DegenerateGrid(String),

    #[error("random MRP generation failed after {attempts} attempts")]
    GenerationExhausted { attempts: usize },

    #[error("time-averaging covariance is degenerate (min eigenvalue {min_eig:e})")]
    DegenerateGamma { min_eig: f64 },

    #[error("model invariant violated: {0}")]
    InvariantViolation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Experiment {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn with_context(self, context: impl Into<String>) -> Error {
        Error::Experiment {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
