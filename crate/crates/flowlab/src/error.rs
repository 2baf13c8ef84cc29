use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature resolution {points} per dimension is below the dealiasing floor {floor}")]
    ResolutionTooLow { points: usize, floor: usize },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered (imminent blow-up)")]
    Overflow,

    #[error("Lyapunov potential is undefined for perturbed flows")]
    UndefinedPotential,

    #[error("operation `{0}` is not defined for perturbed flows")]
    PerturbedFlow(&'static str),

    #[error("a perturbed flow cannot wrap another perturbed flow")]
    NestedPerturbation,

    #[error("no mode group with eigenvalue {0}")]
    UnknownGroup(f64),

    #[error("no equilibrium: lambda_l^m = {lambda_l} must exceed lambda_j^m = {lambda_j}")]
    NoEquilibrium { lambda_j: f64, lambda_l: f64 },

    #[error("zero state: rate classification requires a nonzero coefficient")]
    ZeroState,

    #[error("degenerate projection: state is orthogonal to the manifold eigenspace")]
    DegenerateProjection,

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonNoConvergence { iterations: usize, residual: f64 },

    #[error("Jacobian is singular beyond repair: no usable directions outside the numerical kernel")]
    NewtonSingular,

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("time {t} is outside the recorded range [{t_min}, {t_max}]")]
    OutOfRange { t: f64, t_min: f64, t_max: f64 },

    #[error("cannot evaluate tail energy of a blown-up trajectory")]
    BlownUpTrajectory,

    #[error("scalar flow state left the positive domain at t = {0}")]
    ScalarStep(f64),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
