use thiserror::Error;

/// Errors produced by graph construction, weight construction, engines,
/// oracles, and the experiment harness.
#[derive(Debug, Error)]
pub enum FrostError {
    #[error("edge ({0}, {1}) out of range for {2} nodes")]
    EdgeOutOfRange(usize, usize, usize),

    #[error("edge fraction {fraction} infeasible for n={n}: needs at least {min} directed edges")]
    InfeasibleEdgeFraction { fraction: f64, n: usize, min: usize },

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("graph is not symmetric: edge ({0}, {1}) has no reverse")]
    AsymmetricGraph(usize, usize),

    #[error("weight matrix kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: &'static str, got: &'static str },

    #[error("power iteration did not converge in {max_iter} iterations (last residual {residual:.3e})")]
    PowerIterationDiverged { max_iter: usize, residual: f64 },

    #[error("contraction estimate {0} is not below 1; weight matrix is not primitive")]
    NotContractive(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-positive curvature {0}")]
    NonPositiveCurvature(f64),

    #[error("invariant violation at iteration {iter}: {what}")]
    InvariantViolation { iter: usize, what: String },

    #[error("centralized solver did not reach gradient norm {tol:.3e} in {max_iter} iterations (final {final_norm:.3e})")]
    SolverDidNotConverge { tol: f64, max_iter: usize, final_norm: f64 },

    #[error("rate fit needs at least {needed} residuals above the numerical floor, got {got}")]
    TooFewResiduals { needed: usize, got: usize },

    #[error("step-size regime violation: {0}")]
    RegimeViolation(String),

    #[error("step size {0} out of range (need 0 < alpha < 2/l = {1})")]
    StepSizeOutOfRange(f64, f64),

    #[error("all {0} grid points diverged")]
    AllGridPointsDiverged(usize),

    #[error("experiment diverged at iteration {iter}: residual {residual:.3e} exceeds 1e3 x initial")]
    Diverged { iter: usize, residual: f64 },

    #[error("incompatible configuration: {0}")]
    IncompatibleConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FrostError>;
