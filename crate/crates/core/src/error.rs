use thiserror::Error;

/// Errors shared by all numerical modules.
#[derive(Error, Debug)]
pub enum CoreError {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("under-resolved: {what} needs at least {needed} points, got {got}")]
    Resolution {
        what: String,
        needed: usize,
        got: usize,
    },

    #[error("interaction scale {scale:.3e} below grid resolvability 2*dx = {limit:.3e}; largest admissible N is {max_n}")]
    Resolvability {
        scale: f64,
        limit: f64,
        max_n: f64,
    },

    #[error("solver failed to converge: {0}")]
    SolverConvergence(String),

    #[error("evaluation at the singular point r = 0")]
    Singularity,

    #[error("sobolev order {0} outside supported range 0..=4")]
    SobolevOrder(usize),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("time step too large: energy drift {drift:.3e} exceeds {limit:.3e}")]
    StepSize { drift: f64, limit: f64 },

    #[error("generator assembly violated an invariant: {0}")]
    Assembly(String),

    #[error("operator series not converged after {n_max} terms; residual bound {residual:.3e}")]
    Truncation { n_max: usize, residual: f64 },

    #[error("frame integration diverged at t = {t}: symplectic defect {defect:.3e}")]
    IntegrationDiverged { t: f64, defect: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
