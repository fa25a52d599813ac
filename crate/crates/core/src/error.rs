use thiserror::Error;

pub type Result<T> = std::result::Result<T, RerError>;

#[derive(Debug, Error)]
pub enum RerError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("system is not stable (spectral radius {radius:.6} >= 1)")]
    Unstable { radius: f64 },

    #[error("e^{{j{theta:.6}}} is (numerically) an eigenvalue of the state matrix")]
    EigenvalueOnCircle { theta: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("spectral density is not positive definite at theta = {theta:.6}")]
    DensityNotPositive { theta: f64 },

    #[error("pair (A, B) is not reachable (min Gramian eigenvalue {min_eig:.3e})")]
    Unreachable { min_eig: f64 },

    #[error("covariance is not in Range(Gamma) (feasibility residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("invalid pole set: {0}")]
    InvalidPoles(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular Newton system: {0}")]
    SingularSystem(String),

    #[error("line search exhausted after {halvings} halvings")]
    LineSearch { halvings: usize },

    #[error("no convergence after {iterations} iterations (last gradient norm {grad_norm:.3e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        trace: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}
