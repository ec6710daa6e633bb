use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("vector is not a probability distribution: {0}")]
    NotInSimplex(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("linear system is singular or ill-conditioned (residual {residual:e}); model is internally inconsistent")]
    SingularSystem { residual: f64 },

    #[error("KL divergence undefined: p({index}) > 0 where q({index}) = 0")]
    DivergenceUndefined { index: usize },

    #[error("unsupported prox pairing: {0}")]
    UnsupportedProx(String),

    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),

    #[error("geometric schedule needs a positive initial gap, got {0}")]
    ZeroInitialGap(f64),

    #[error("step schedule exhausted at iteration {iter} (horizon {horizon})")]
    ScheduleExhausted { iter: usize, horizon: usize },

    #[error("{0} requires an unregularized model")]
    RegularizedModel(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}
