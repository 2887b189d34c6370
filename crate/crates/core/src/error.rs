use thiserror::Error;

/// Errors raised by the manifold kernels, losses and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("factor is not orthonormal: defect {defect:.3e} exceeds tolerance {tol:.1e}")]
    NotOrthonormal { defect: f64, tol: f64 },

    #[error("base point has rank {rank}, which is not below the target rank {target}")]
    RankNotDeficient { rank: usize, target: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empirical loss requires a measurement ensemble")]
    MissingEnsemble,

    #[error("gradient undefined at the zero matrix: {0}")]
    ZeroNorm(&'static str),

    #[error("core matrix is singular (smallest singular value {sigma_min:.3e})")]
    SingularCore { sigma_min: f64 },

    #[error("sample set is empty")]
    EmptySample,

    #[error("integration failed at t = {t}: h = {h}, rho = {rho}")]
    NonPositiveH { t: f64, h: f64, rho: f64 },

    #[error("iterate diverged at step {iter}")]
    Diverged { iter: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("plot error: {0}")]
    Plot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            expected: expected.into(),
            found: found.into(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParameter { .. }
                | Error::Schema(_)
                | Error::Plot(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::MissingEnsemble
        )
    }
}
