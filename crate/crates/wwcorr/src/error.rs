use thiserror::Error;

/// Errors surfaced by the semiclassical machinery.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("no unique closed polygon for an even number of reflection centres ({0})")]
    EvenPolygon(usize),

    #[error("caustic: det(I+M) = {det:.3e} below threshold")]
    Caustic { det: f64 },

    #[error("periodic-orbit resonance: det(I-M) = {det:.3e}")]
    Resonance { det: f64 },

    #[error("matrix is not positive definite")]
    NonPositiveDefinite,

    #[error("grid too coarse: spectral mass {leak:.3e} in the outer band exceeds {threshold:.1e}")]
    GridTooCoarse { leak: f64, threshold: f64 },

    #[error("Newton iteration failed after {iters} steps, residual {residual:.3e}")]
    NewtonFailed { iters: usize, residual: f64 },

    #[error("flow failure in segment {segment}: {reason}")]
    FlowFailure { segment: usize, reason: String },

    #[error("estimator parity violation: {0}")]
    ParityViolation(String),

    #[error("oracle cutoff too small: tail norm {tail:.3e}")]
    CutoffTooSmall { tail: f64 },

    #[error("sampler degenerate: {0}")]
    SamplerDegenerate(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
