use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero-length direction vector")]
    ZeroDirection,

    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e} relative to norm)")]
    NotHermitian { asymmetry: f64 },

    #[error("transverse field must be zero for the aligned closed form (got {0:.3e} T)")]
    NotAligned(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("steady state is not unique: level graph has {closed_classes} closed classes")]
    NonUniqueSteadyState { closed_classes: usize },

    #[error("steady-state solve failed: {0}")]
    SingularRateMatrix(String),

    #[error("no photocurrent without microwaves; contrast undefined")]
    ZeroCurrent,

    #[error("root solve did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("underdetermined problem: {0}")]
    Underdetermined(String),

    #[error("table format error at line {line}: {reason}")]
    Table { line: usize, reason: String },

    #[error("profile error: {0}")]
    Profile(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// Errors that come from numerics rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotHermitian { .. }
                | Error::NonUniqueSteadyState { .. }
                | Error::SingularRateMatrix(_)
                | Error::ZeroCurrent
                | Error::NoConvergence { .. }
        )
    }
}
