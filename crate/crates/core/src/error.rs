use thiserror::Error;

/// Errors raised by the evolution engine, the reduced map and the
/// continuation and attractor tools.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gradient of the switching function vanishes at the evaluation point")]
    ZeroGradient,

    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("degenerate crossing at t = {t}: |dh/dt| = {rate:e} below tangency tolerance")]
    DegenerateCrossing { t: f64, rate: f64 },

    #[error("monitoring window {window} overlaps the neighbouring crossing at t = {neighbour}")]
    WindowTooLarge { window: f64, neighbour: f64 },

    #[error("no root of the implicit time equation in [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("derivative of the implicit time equation vanishes ({derivative:e}): transversality lost")]
    DegenerateDerivative { derivative: f64 },

    #[error("point lies {distance} from the reference point, outside the radius {radius}")]
    OutsideNeighborhood { distance: f64, radius: f64 },

    #[error("collision surface is singular at tau = {tau} (condition number {condition:e})")]
    SingularSurface { tau: f64, condition: f64 },

    #[error("collision parameters give epsilon = {epsilon}, not on the physical (epsilon > 0) surface")]
    NegativeEpsilon { epsilon: f64 },

    #[error("collision is not strictly transversal (q = {q})")]
    NotStrictlyTransversal { q: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian in Newton iteration")]
    SingularJacobian,

    #[error("initial continuation point failed to converge: {0}")]
    InitialPointFailed(String),

    #[error("invariant curve parametrization broke down: {0}")]
    ParametrizationBreakdown(String),

    #[error("collision angle is not a maximum of t (second derivative {second:e})")]
    NotAMaximum { second: f64 },

    #[error("invariant curve is close to break-up (error estimate {estimate:e})")]
    BreakupDetected { estimate: f64 },

    #[error("iterate {iteration} left the working neighbourhood")]
    LeftNeighborhood { iteration: usize },

    #[error("centroid lies on the sampled curve; angles are degenerate")]
    CentroidOnCurve,

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
