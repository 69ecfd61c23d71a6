use thiserror::Error;

/// Library-level failure modes. Values are reported as `f64` regardless of
/// the scalar the computation ran at.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("metric singularity: buffer factor below floor at c = {c}")]
    MetricSingular { c: f64 },

    #[error("degenerate path: total length below 1e-12")]
    DegeneratePath,

    #[error("Newton did not converge in {iters} iterations (residual {residual:e})")]
    NewtonNoConvergence { iters: usize, residual: f64 },

    #[error("singular Jacobian in Newton step")]
    SingularJacobian,

    #[error("no limit cycle: {0}")]
    NoCycle(String),

    #[error("trajectory left the admissible domain at t = {t}")]
    DomainExit { t: f64 },

    #[error("tridiagonal solve failed: zero pivot")]
    LinearSolve,

    #[error("all candidate endpoints failed: {}", .0.join("; "))]
    AllCandidatesFailed(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
